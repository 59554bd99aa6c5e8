"""
Domain models: run parameters, the mesh and simulation state containers.
"""
