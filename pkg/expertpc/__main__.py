#!/usr/bin/env python3
from expertpc._app import main

main()
