# exciton_pimc/logger.py

import logging
import os
import sys

from dotenv import load_dotenv

load_dotenv()


# Define color codes for console output
class BColors:
    HEADER = "\033[95m"
    OKBLUE = "\033[94m"
    OKCYAN = "\033[96m"
    OKGREEN = "\033[92m"
    WARNING = "\033[93m"
    FAIL = "\033[91m"
    ENDC = "\033[0m"
    BOLD = "\033[1m"


def _colored(color: str, message: str) -> str:
    if os.getenv("PIMC_LOG_COLOR", "1") == "0":
        return message
    return f"{color}{message}{BColors.ENDC}"


def get_logger(name: str):
    """Creates and configures a logger."""
    logger = logging.getLogger(name)
    level = os.getenv("PIMC_LOG_LEVEL", "INFO").upper()
    logger.setLevel(level)
    if not logger.handlers:
        ch = logging.StreamHandler(sys.stdout)
        ch.setLevel(level)
        formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
        ch.setFormatter(formatter)
        logger.addHandler(ch)
    return logger


# All helpers pass **kwargs (e.g. exc_info=True) through to the logger.
def log_info(logger, message, **kwargs):
    logger.info(_colored(BColors.OKBLUE, message), **kwargs)


def log_success(logger, message, **kwargs):
    logger.info(_colored(BColors.OKGREEN, message), **kwargs)


def log_warning(logger, message, **kwargs):
    logger.warning(_colored(BColors.WARNING, message), **kwargs)


def log_error(logger, message, **kwargs):
    logger.error(_colored(BColors.FAIL, message), **kwargs)


def log_chain_start(logger, chain_index, details):
    logger.info(
        _colored(BColors.OKCYAN, f"--- [CHAIN START]: #{chain_index} {details} ---")
    )


def log_chain_end(logger, chain_index, details):
    logger.info(
        _colored(BColors.OKCYAN, f"--- [CHAIN END]: #{chain_index} {details} ---")
    )


def log_progress(logger, chain_index, step, acceptance):
    logger.info(
        _colored(
            BColors.HEADER,
            f"--- [PROGRESS]: chain #{chain_index} step {step} acceptance {acceptance:.3f} ---",
        )
    )


def log_oracle_call(logger, name, params):
    logger.info(
        _colored(BColors.WARNING, f"--- [ORACLE]: {name} with params: {params} ---")
    )
