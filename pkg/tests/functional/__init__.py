# Functional tests for the code_analyzer module
