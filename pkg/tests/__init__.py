"""
Pruebas para el control de quimiostatos.
"""