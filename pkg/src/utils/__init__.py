# [Purpose] Logging, error types and unit-suffixed quantities shared by all modules
