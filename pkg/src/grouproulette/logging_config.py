# grouproulette/logging_config.py
import logging
import logging.config

LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']


def setup_logging(default_level='WARNING', log_file='grouproulette.log'):
    """
    Set up logging configuration.

    Args:
        default_level (str): The default logging level ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL').
        log_file (str, optional): File receiving a copy of every record. None logs to the console only.
    """
    default_level = default_level.upper()
    if default_level not in LEVELS:
        raise ValueError(f"Invalid logging level: {default_level}")

    handlers = ['console', 'file'] if log_file else ['console']

    logging_config = {
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'standard': {
                'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            },
        },
        'handlers': {
            'console': {
                'class': 'logging.StreamHandler',
                'formatter': 'standard',
            },
        },
        'loggers': {
            'grouproulette': {
                'handlers': handlers,
                'level': default_level,
                'propagate': False,
            },
        }
    }
    if log_file:
        logging_config['handlers']['file'] = {
            'class': 'logging.FileHandler',
            'formatter': 'standard',
            'filename': log_file,
            'delay': True,
        }

    logging.config.dictConfig(logging_config)


def set_logging_level(level):
    """
    Set the logging level for the 'grouproulette' logger and all its handlers.

    Args:
        level (str): The logging level to set ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL').
    """
    level = level.upper()
    if level not in LEVELS:
        raise ValueError(f"Invalid logging level: {level}")

    logger = logging.getLogger('grouproulette')
    logger.setLevel(level)

    for handler in logger.handlers:
        handler.setLevel(level)
