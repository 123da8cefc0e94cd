"""Module for configuring profgpr's logging facilities
"""
import logging
from logging.handlers import RotatingFileHandler
import multiprocessing
import os
import shutil
import sys

from profgpr import base_path

_default_log_path = os.environ.get('PROFGPR_LOG_DIR', os.path.join(base_path, 'log'))
_default_log_level = logging.DEBUG
_default_logger_name = 'profgpr'


def _mod_func_filter(record):
    """Custom Filter function which adds context to log messages, prepending the module and function (if applicable)
    from which the log message was issued.

    Parameters
    ----------
    record : logging.LogRecord

    Returns
    -------
    updated_record : logging.LogRecord
    """
    # Module-level messages report only the module
    mod_func_str = record.module if record.funcName == "<module>" else f"{record.module}.{record.funcName}"
    record.msg = f"{mod_func_str:>28s} | {record.msg}"
    return record


def _loglevel_fmt_filter(record):
    """Custom Filter function which formats the log-level name of log records.

    Parameters
    ----------
    record : logging.LogRecord

    Returns
    -------
    updated_record : logging.LogRecord
    """
    record.levelname = f"{'['+record.levelname+']':>9s}"
    return record


def _rotator(source, dest):
    """Rotator for Log File"""
    with open(source, 'rb') as fin:
        with open(dest, 'wb') as fout:
            shutil.copyfileobj(fin, fout)
    os.remove(source)


def get_logger(name=_default_logger_name, log_path=_default_log_path, log_level=_default_log_level):
    """Get profgpr-style Logger singleton. If none exist, create a new one.
    A new logger created in the parent process rolls the old logfile over; sweep workers append to it.

    Parameters
    ----------
    name : str
        logger name (also sets logfile name)
    log_path : str or PathLike
        Directory holding the log file, created if missing
    log_level : int
        Python Logging level e.g. logging.DEBUG (10), logging.ERROR (40)

    Returns
    -------
    logger : logging.Logger
        Python Logger configured with profgpr format and style.
    """
    if name in logging.Logger.manager.loggerDict.keys():
        return logging.getLogger(name)

    os.makedirs(log_path, exist_ok=True)
    log_file = os.path.join(log_path, f'{name}.log')
    is_parent = multiprocessing.parent_process() is None

    handler = RotatingFileHandler(log_file, backupCount=3, delay=not is_parent)
    handler.rotator = _rotator
    formatter = logging.Formatter('%(asctime)s.%(msecs)03d %(levelname)s %(message)s', datefmt='%Y-%m-%dT%H:%M:%S')
    handler.setFormatter(formatter)
    handler.addFilter(_mod_func_filter)
    handler.addFilter(_loglevel_fmt_filter)

    logger = logging.getLogger(name)
    logger.setLevel(log_level)
    logger.addHandler(handler)
    logger.propagate = False

    # If a previous log file is found, rollover to a new file
    if is_parent and os.path.isfile(log_file) and os.path.getsize(log_file) > 0:
        logger.debug('Log File has been closed')
        handler.doRollover()

    return logger


def echo_to_stderr(logger, level=logging.INFO):
    """Attach a console handler so messages at `level` and above are also written to stderr

    Parameters
    ----------
    logger : logging.Logger
    level : int
        Minimum level echoed to the console
    """
    if any(getattr(h, '_profgpr_console', False) for h in logger.handlers):
        return
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(level)
    console.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
    console._profgpr_console = True
    logger.addHandler(console)
