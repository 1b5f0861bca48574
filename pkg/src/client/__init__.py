# NocPerf client (CLI)
