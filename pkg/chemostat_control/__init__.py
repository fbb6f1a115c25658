"""
Paquete para el control por realimentación de quimiostatos con mortalidad.
"""
__version__ = "0.1.0"
