pytest_plugins = "occsearch.fixtures"
