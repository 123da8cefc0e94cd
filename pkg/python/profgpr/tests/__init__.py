from .profgpr_test_suite import runtests
