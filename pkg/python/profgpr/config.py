"""Helpers for building profgpr objects from INI configuration files
"""
from configparser import ConfigParser
import ast
import os

from profgpr.logger import get_logger

logger = get_logger()


def read_config(conf=None, conf_path=None):
    """Obtain a ConfigParser from either an existing object or a file path

    Parameters
    ----------
    conf : configparser.ConfigParser
        Already-parsed configuration, returned unchanged if given
    conf_path : str or path-like
        Path to INI file

    Returns
    -------
    conf : configparser.ConfigParser
    """
    if conf is None and conf_path is None:
        raise ValueError("Missing configuration")
    if conf is not None:
        return conf
    if not os.path.exists(conf_path):
        err_msg = f"Unable to find config file: {conf_path}"
        logger.error(err_msg)
        raise FileNotFoundError(err_msg)
    conf = ConfigParser()
    conf.read(conf_path)
    return conf


def parse_value(value):
    """Parse an INI value as a Python literal, falling back to the bare string

    Parameters
    ----------
    value : str

    Returns
    -------
    parsed : object
    """
    try:
        return ast.literal_eval(value)
    except (ValueError, SyntaxError):
        return value.strip()


def section_kwargs(conf, section):
    """Keyword arguments held by one section of a configuration

    Parameters
    ----------
    conf : configparser.ConfigParser
    section : str

    Returns
    -------
    kwargs : dict
        Empty if the section is absent
    """
    if not conf.has_section(section):
        return {}
    # [DEFAULT] keys are inherited by every section and are not part of its schema
    defaults = conf.defaults()
    return {key: parse_value(val) for key, val in conf.items(section, raw=True) if key not in defaults}


def from_section(cls, section, conf=None, conf_path=None, **overrides):
    """Construct `cls` from a configuration section, translating signature mismatches into config errors

    Parameters
    ----------
    cls : type
        Class whose ``__init__`` keywords match the section keys
    section : str
        Section name
    conf : configparser.ConfigParser
    conf_path : str or path-like
    overrides : dict
        Values taking priority over the file

    Returns
    -------
    obj : cls
    """
    conf = read_config(conf, conf_path)
    conf_dict = section_kwargs(conf, section)
    conf_dict.update({key: val for key, val in overrides.items() if val is not None})
    try:
        return cls(**conf_dict)
    except TypeError as err:
        msg = str(err)
        bad_field = msg.split('\'')[-2] if '\'' in msg else msg
        if "required positional argument" in msg:
            raise TypeError(f"Config. [{section}] is missing a required field: '{bad_field}'") from err
        elif "got an unexpected keyword argument" in msg:
            raise TypeError(f"Config. [{section}] contains an unexpected field: '{bad_field}'") from err
        else:
            raise err
