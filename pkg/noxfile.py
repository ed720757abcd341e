#!/usr/bin/env python3
from nox_tools import config, linting, tests, typing

config.module = 'expertpc'
config.sessions = [linting, tests, typing]
