# [Purpose] Offshore wind hub grid studio: network model, dynamic simulation and techno-economic planning
