# [Purpose] Application settings for the offshore hub grid studio
# [Source] Environment variables, optionally loaded from a local .env file
# [Comment] Only presentation concerns live here; every numerical input comes from the run configuration

import os

# [Library] dotenv - Load environment variables from .env file
# [Source] https://github.com/theskumar/python-dotenv
from dotenv import load_dotenv

load_dotenv()


class Settings:
    # [Comment] Application metadata
    APP_NAME: str = "Offshore Wind Hub Grid Studio"
    APP_VERSION: str = "1.0.0"
    APP_DESCRIPTION: str = (
        "Dual-fidelity (EMT-style and phasor) simulation of an offshore wind-hub AC grid "
        "with HVDC links, plus a frequency/voltage techno-economic planner"
    )

    # [Comment] Logging configuration
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_TO_FILE: bool = os.getenv("LOG_TO_FILE", "False").lower() == "true"
    LOG_FILE_PATH: str = os.getenv("LOG_FILE_PATH", "logs/hubgrid.log")

    # [Comment] Default directory for results when a command gets no --out
    OUTPUT_DIR: str = os.getenv("OUTPUT_DIR", "results")


settings = Settings()
