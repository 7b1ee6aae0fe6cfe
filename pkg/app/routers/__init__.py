# This file makes routers a Python package
