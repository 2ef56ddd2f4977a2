# [Purpose] Grid, network, power-flow, simulation and run-configuration services
