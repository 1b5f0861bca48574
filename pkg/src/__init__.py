# NocPerf source root
