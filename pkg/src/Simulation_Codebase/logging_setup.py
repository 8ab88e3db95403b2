import logging
import logging.handlers
import os
from datetime import datetime

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
MAX_LOG_BYTES = 10 * 1024 * 1024  # 10MB
LOG_BACKUPS = 5


def _attach(root_logger: logging.Logger, handler: logging.Handler, level: int):
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    root_logger.addHandler(handler)


def _rotating(path: str) -> logging.Handler:
    return logging.handlers.RotatingFileHandler(
        path, maxBytes=MAX_LOG_BYTES, backupCount=LOG_BACKUPS, encoding="utf-8"
    )


def setup_logging(log_dir: str = "logs", console_level: int = logging.INFO) -> logging.Logger:
    """Console plus rotating run/error logs and one session file per CLI invocation."""
    os.makedirs(log_dir, exist_ok=True)

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)
    root_logger.handlers.clear()

    run_log = os.path.join(log_dir, "collapse_lab.log")
    error_log = os.path.join(log_dir, "collapse_lab_errors.log")
    session_log = os.path.join(
        log_dir, f"session_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log"
    )

    _attach(root_logger, logging.StreamHandler(), console_level)
    _attach(root_logger, _rotating(run_log), logging.DEBUG)
    _attach(root_logger, _rotating(error_log), logging.ERROR)
    _attach(root_logger, logging.FileHandler(session_log, encoding="utf-8"), logging.DEBUG)

    logger = logging.getLogger("CollapseLabLogging")
    logger.info("Collapse lab logging initialized")
    logger.info(f"Log files: {run_log}, {error_log}, {session_log}")
    return logger


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
