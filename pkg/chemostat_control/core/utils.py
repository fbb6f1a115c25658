"""
Funciones de utilidad: búsquedas sobre mallas, raíces y persistencia.
"""
import json
import os
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import bisect, minimize_scalar

PUNTOS_MALLA = 4096


def extremo_en_intervalo(fn: Callable, a: float, b: float,
                         n_puntos: int = PUNTOS_MALLA,
                         maximizar: bool = True) -> Tuple[float, float]:
    """
    Busca el máximo (o mínimo) de una función escalar en [a, b].

    Evalúa una malla uniforme de ``n_puntos`` y refina alrededor del mejor
    punto de la malla con una búsqueda de sección dorada.

    Args:
        fn: Función vectorizada sobre arrays de numpy.
        a: Extremo izquierdo.
        b: Extremo derecho.
        n_puntos: Número de puntos de la malla.
        maximizar: Si True busca el máximo; si False, el mínimo.

    Returns:
        Tupla (argumento, valor) del extremo encontrado.
    """
    signo = 1.0 if maximizar else -1.0
    malla = np.linspace(a, b, n_puntos)
    valores = signo * np.asarray(fn(malla), dtype=float)
    i = int(np.argmax(valores))
    mejor_x, mejor_v = float(malla[i]), float(valores[i])

    # Los extremos del intervalo no se refinan
    if 0 < i < n_puntos - 1:
        try:
            res = minimize_scalar(
                lambda s: -signo * float(fn(np.asarray(s))),
                bracket=(malla[i - 1], malla[i], malla[i + 1]),
                method="golden",
            )
            x_ref = float(np.clip(res.x, a, b))
            v_ref = signo * float(fn(np.asarray(x_ref)))
            if v_ref > mejor_v:
                mejor_x, mejor_v = x_ref, v_ref
        except ValueError:
            # Meseta: la malla no forma un intervalo de encierro válido
            pass

    return mejor_x, signo * mejor_v


def raices_en_intervalo(fn: Callable, a: float, b: float,
                        n_puntos: int = PUNTOS_MALLA,
                        xtol: float = 1e-12) -> List[float]:
    """
    Encuentra todas las raíces de ``fn`` en el intervalo abierto (a, b).

    Encierra cada raíz por cambio de signo en una malla interior y la
    refina por bisección. También detecta raíces tangentes: extremos
    locales de la malla que tocan cero tras refinar.

    Args:
        fn: Función vectorizada.
        a: Extremo izquierdo (excluido).
        b: Extremo derecho (excluido).
        n_puntos: Número de subintervalos de la malla.
        xtol: Tolerancia absoluta de la bisección.

    Returns:
        Lista ascendente de raíces.
    """
    malla = a + (b - a) * np.arange(1, n_puntos) / n_puntos
    valores = np.asarray(fn(malla), dtype=float)
    raices = []

    for i in range(len(malla)):
        if valores[i] == 0.0:
            raices.append(float(malla[i]))
            continue
        if i + 1 < len(malla) and valores[i] * valores[i + 1] < 0:
            raices.append(float(bisect(lambda s: float(fn(np.asarray(s))),
                                       malla[i], malla[i + 1], xtol=xtol)))

    # Raíces tangentes (extremo local que roza el cero)
    for i in range(1, len(malla) - 1):
        v_izq, v, v_der = valores[i - 1], valores[i], valores[i + 1]
        es_max = v > v_izq and v >= v_der and v < 0
        es_min = v < v_izq and v <= v_der and v > 0
        if not (es_max or es_min):
            continue
        x_ext, v_ext = extremo_en_intervalo(
            fn, malla[i - 1], malla[i + 1], n_puntos=3, maximizar=es_max)
        if abs(v_ext) <= 1e-12:
            raices.append(x_ext)

    raices.sort()
    # Elimina duplicados producidos por raíces en nodos de la malla
    unicas = []
    for r in raices:
        if not unicas or abs(r - unicas[-1]) > 10 * xtol:
            unicas.append(r)
    return unicas


def contar_signos(valores: Sequence[complex], tol: float = 1e-8) -> Tuple[int, int, int]:
    """Cuenta partes reales (positivas, negativas, nulas) con tolerancia."""
    reales = np.real(np.asarray(valores))
    escala = max(1.0, float(np.max(np.abs(reales)))) if len(reales) else 1.0
    umbral = tol * escala
    n_pos = int(np.sum(reales > umbral))
    n_neg = int(np.sum(reales < -umbral))
    return n_pos, n_neg, len(reales) - n_pos - n_neg


def a_nativo(obj: Any) -> Any:
    """Convierte recursivamente tipos de numpy a tipos nativos para JSON."""
    if isinstance(obj, dict):
        return {str(k): a_nativo(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [a_nativo(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [a_nativo(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"real": obj.real, "imag": obj.imag}
    return obj


def guardar_json(datos: Dict[str, Any], ruta: str) -> str:
    """
    Guarda un reporte en JSON de forma determinista.

    Args:
        datos: Diccionario serializable (se convierten tipos de numpy).
        ruta: Ruta del archivo de salida.

    Returns:
        La ruta escrita.
    """
    directorio = os.path.dirname(ruta)
    if directorio:
        os.makedirs(directorio, exist_ok=True)
    with open(ruta, "w", encoding="utf-8") as f:
        json.dump(a_nativo(datos), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    return ruta


def guardar_csv(df: pd.DataFrame, ruta: str) -> str:
    """Guarda un DataFrame en CSV con la representación decimal más corta."""
    directorio = os.path.dirname(ruta)
    if directorio:
        os.makedirs(directorio, exist_ok=True)
    df.to_csv(ruta, index=False, lineterminator="\n")
    return ruta


def cargar_csv(ruta: str) -> pd.DataFrame:
    """Carga un CSV emitido por el paquete sin pérdida de precisión."""
    return pd.read_csv(ruta, float_precision="round_trip")
