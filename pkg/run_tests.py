#!/usr/bin/env python3
"""
Test runner that sets up the environment before running tests
Extra arguments are passed to pytest, e.g. `run_tests.py -m acceptance`;
`--parallel` spreads the tests over all cores with pytest-xdist.
"""

import os
import sys
from dotenv import load_dotenv

# Load environment variables
env_file = os.path.join(os.path.dirname(__file__), '.env')
if os.path.exists(env_file):
    load_dotenv(env_file)
    print(f"Loaded environment from {env_file}")
else:
    print(f"No .env file found at {env_file}; Jobs tests use synthetic files")

# Tests must not inherit a production log format or thread cap
os.environ.setdefault('ENVIRONMENT', 'test')

import pytest

args = sys.argv[1:]
parallel = []
if '--parallel' in args:
    args.remove('--parallel')
    parallel = ['-n', 'auto']

exit_code = pytest.main([
    'tests',
    '-v',
    '--tb=short',
    '--color=yes',
    '-p', 'no:warnings',
    *parallel,
    *args,
])

sys.exit(exit_code)
