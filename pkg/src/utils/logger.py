# [Purpose] Logging configuration shared by every hub-grid service
# [Source] Python logging module, one named logger per module
# [Comment] Diagnostics go to stderr so stdout stays reserved for command output

# [Library] logging - Python's built-in logging facility
import logging

# [Library] sys - stderr stream for the console handler
import sys

# [Library] os - log directory creation
import os

# [Library] functools - keep wrapped function metadata in the decorator
import functools

# [Library] typing - Type hints
from typing import Optional

from src.config import settings


class CustomFormatter(logging.Formatter):
    """
    [Purpose] Formats log records as [TIMESTAMP] [LEVEL] [MODULE] - MESSAGE
    [Parameters]
    - use_colors: wrap the line in an ANSI colour for the record's level
    """

    COLORS = {
        'DEBUG': '\033[36m',     # [Color] Cyan
        'INFO': '\033[32m',      # [Color] Green
        'WARNING': '\033[33m',   # [Color] Yellow
        'ERROR': '\033[31m',     # [Color] Red
        'CRITICAL': '\033[35m'   # [Color] Magenta
    }
    RESET = '\033[0m'

    def __init__(self, use_colors: bool = True):
        # [Format] [2026-03-02 10:30:45] [INFO] [src.services.sim_engine] - t=0.500 s device-trip conv1
        super().__init__(
            fmt='[%(asctime)s] [%(levelname)s] [%(name)s] - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        self.use_colors = use_colors

    def format(self, record):
        log_message = super().format(record)
        if self.use_colors and record.levelname in self.COLORS:
            color = self.COLORS[record.levelname]
            log_message = f"{color}{log_message}{self.RESET}"
        return log_message


def get_logger(
    name: str,
    level: Optional[str] = None,
    log_to_file: Optional[bool] = None,
    log_file_path: Optional[str] = None
) -> logging.Logger:
    """
    [Purpose] Creates or returns the configured logger for a module

    [Parameters]
    - name: Logger name (the module's __name__)
    - level: DEBUG, INFO, WARNING, ERROR or CRITICAL; settings.LOG_LEVEL when omitted
    - log_to_file: also write uncoloured lines to log_file_path; settings.LOG_TO_FILE when omitted
    - log_file_path: target file for the optional file handler; settings.LOG_FILE_PATH when omitted

    [Returns]
    - logging.Logger with exactly one console handler

    [Usage]
    from src.utils.logger import get_logger
    logger = get_logger(__name__)
    logger.info("Power flow converged in 4 iterations")
    """
    logger = logging.getLogger(name)

    # [Comment] Configure once; repeated calls return the same logger untouched
    if not logger.handlers:
        if level is None:
            level = settings.LOG_LEVEL
        log_level = getattr(logging, level.upper(), logging.INFO)
        logger.setLevel(log_level)

        # [Comment] Colours only when stderr is a terminal
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(log_level)
        console_handler.setFormatter(CustomFormatter(use_colors=sys.stderr.isatty()))
        logger.addHandler(console_handler)

        if log_to_file is None:
            log_to_file = settings.LOG_TO_FILE
        if log_to_file:
            log_file_path = log_file_path or settings.LOG_FILE_PATH
            log_dir = os.path.dirname(log_file_path)
            if log_dir and not os.path.exists(log_dir):
                os.makedirs(log_dir, exist_ok=True)
            file_handler = logging.FileHandler(log_file_path)
            file_handler.setLevel(log_level)
            file_handler.setFormatter(CustomFormatter(use_colors=False))
            logger.addHandler(file_handler)

        logger.propagate = False

    return logger


def set_global_level(level: str) -> None:
    """
    [Purpose] Re-levels every logger created through get_logger
    [Usage] Called by the CLI after parsing --log-level
    """
    log_level = getattr(logging, level.upper(), logging.INFO)
    for logger_name in list(logging.Logger.manager.loggerDict):
        candidate = logging.getLogger(logger_name)
        if candidate.handlers and not candidate.propagate:
            candidate.setLevel(log_level)
            for handler in candidate.handlers:
                handler.setLevel(log_level)


def log_exception(logger: logging.Logger, exception: Exception, context: str = ""):
    """
    [Purpose] Logs an exception with its traceback and an optional context phrase

    [Usage]
    try:
        run_scenario(cfg)
    except SimulationError as e:
        log_exception(logger, e, "while running s2-converter-trip")
    """
    error_msg = "Exception occurred"
    if context:
        error_msg += f" {context}"
    error_msg += f": {str(exception)}"
    logger.error(error_msg, exc_info=True)


def log_function_call(logger: logging.Logger):
    """
    [Purpose] Decorator logging entry and exit of long-running operations

    [Usage]
    @log_function_call(logger)
    def run_scenario(cfg):
        ...
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            logger.debug(f"Entering function: {func.__name__}")
            try:
                result = func(*args, **kwargs)
                logger.debug(f"Exiting function: {func.__name__} (success)")
                return result
            except Exception as e:
                logger.error(
                    f"Exception in function {func.__name__}: {str(e)}",
                    exc_info=True
                )
                raise
        return wrapper
    return decorator
