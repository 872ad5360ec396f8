# Test suite for the code_analyzer module
