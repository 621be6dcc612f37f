import os
import logging

LOG_FILE: str = "logs/wavelab.log"
LOGGER_NAME: str = "wavelab"

def init_logging(log_path: str = LOG_FILE, overwrite: bool = True, level: int = logging.INFO) -> logging.Logger:
    """
    Initialize the package logger to log both to a file (UTF-8) and to the console.

    :param log_path: Path of the log file; its directory is created if missing.
    :param overwrite: Truncate the log file instead of appending.
    :param level: Logging level of both handlers.
    :return: The configured package logger.
    """
    directory = os.path.dirname(log_path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    formatter = logging.Formatter("%(asctime)s [%(levelname)s] %(message)s")
    file_handler = logging.FileHandler(log_path, mode='w' if overwrite else 'a', encoding='utf-8')
    file_handler.setFormatter(formatter)
    stream_handler = logging.StreamHandler()
    stream_handler.setFormatter(formatter)

    logger = logging.getLogger(LOGGER_NAME)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    logger.addHandler(file_handler)
    logger.addHandler(stream_handler)
    logger.setLevel(level)
    logger.propagate = False

    return logger

# Library modules log through this logger; handlers are attached by init_logging()
log: logging.Logger = logging.getLogger(LOGGER_NAME)
log.addHandler(logging.NullHandler())
