"""Path configuration for the project"""

DEFAULT_OUTPUT_DIR = "./results"
DEFAULT_DATA_DIR = "./data"
DEFAULT_LOGS_DIR = "./logs"
DEFAULT_CONFIG_DIR = "./configs"
