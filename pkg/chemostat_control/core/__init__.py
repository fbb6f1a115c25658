"""
Núcleo numérico: cinéticas, modelos, integración y análisis.
"""
