# File readers and writers for vectors, ensembles, tables and reports
