# [Purpose] Pydantic models: network, device parameters, cost model, traces and reports
