"""
Ejecución por lotes de trayectorias independientes, en paralelo o en serie.
"""
import multiprocessing
from concurrent.futures import ProcessPoolExecutor, as_completed
from concurrent.futures.process import BrokenProcessPool
from pickle import PicklingError
from typing import Any, Callable, Dict, List, Optional, Tuple


def _ejecutar_tarea_worker(worker: Callable, indice: int,
                           tarea: Dict[str, Any]) -> Tuple[int, Any, List[str]]:
    """
    Envoltura a nivel de módulo para que la tarea sea serializable.

    Args:
        worker: Función de trabajo definida a nivel de módulo.
        indice: Posición de la tarea en la lista original.
        tarea: Argumentos de la tarea.

    Returns:
        Tupla (índice, resultado o None, advertencias).
    """
    try:
        resultado, advertencias = worker(tarea)
        return indice, resultado, list(advertencias)
    except Exception as e:
        # Un fallo de una trayectoria no detiene el lote
        return indice, None, [f"Error en la trayectoria {indice}: {e}"]


class TrajectoryProcessor:
    """
    Reparte tareas de simulación entre procesos y ensambla los resultados
    en el orden original.
    """

    def __init__(self, modo_detallado: bool = False, max_workers: Optional[int] = None,
                 batch_size: int = 64):
        """
        Inicializa el procesador.

        Args:
            modo_detallado: Si True, muestra el progreso por trayectoria.
            max_workers: Número de procesos; None usa los núcleos disponibles.
            batch_size: Tareas por lote enviado al pool.
        """
        self.modo_detallado = modo_detallado
        self.max_workers = max_workers or multiprocessing.cpu_count()
        self.batch_size = max(1, batch_size)
        self.advertencias: List[str] = []
        self.tareas_procesadas = 0
        self.tareas_fallidas = 0

    def _registrar(self, indice: int, total: int, resultado: Any, advertencias: List[str]):
        self.tareas_procesadas += 1
        if resultado is None:
            self.tareas_fallidas += 1
        for adv in advertencias:
            self.advertencias.append(adv)
            if self.modo_detallado:
                print(f"  - {adv}")
        if self.modo_detallado:
            estado = "fallida" if resultado is None else "completada"
            print(f"[{self.tareas_procesadas}/{total}] Trayectoria {indice} {estado}")

    def procesar_secuencial(self, worker: Callable, tareas: List[Dict[str, Any]],
                            indices: Optional[List[int]] = None,
                            resultados: Optional[List[Any]] = None) -> List[Any]:
        resultados = resultados if resultados is not None else [None] * len(tareas)
        for i in (indices if indices is not None else range(len(tareas))):
            _, resultado, advertencias = _ejecutar_tarea_worker(worker, i, tareas[i])
            resultados[i] = resultado
            self._registrar(i, len(tareas), resultado, advertencias)
        return resultados

    def procesar_paralelo(self, worker: Callable, tareas: List[Dict[str, Any]]) -> List[Any]:
        """
        Procesa las tareas con ProcessPoolExecutor por lotes.

        Las tareas que no pueden enviarse al pool (por ejemplo, cinéticas
        con funciones no serializables) se repiten en serie.
        """
        resultados: List[Any] = [None] * len(tareas)
        pendientes: List[int] = []
        indices = list(range(len(tareas)))
        lotes = [indices[i:i + self.batch_size] for i in range(0, len(indices), self.batch_size)]
        if self.modo_detallado:
            print(f"Dividiendo {len(tareas)} trayectorias en {len(lotes)} lotes "
                  f"de hasta {self.batch_size}")

        for num_lote, lote in enumerate(lotes, 1):
            if self.modo_detallado:
                print(f"\nProcesando lote {num_lote}/{len(lotes)} ({len(lote)} trayectorias)")
            with ProcessPoolExecutor(max_workers=self.max_workers) as executor:
                futuros = {executor.submit(_ejecutar_tarea_worker, worker, i, tareas[i]): i
                           for i in lote}
                for futuro in as_completed(futuros):
                    i = futuros[futuro]
                    try:
                        _, resultado, advertencias = futuro.result()
                    except (PicklingError, AttributeError, TypeError, BrokenProcessPool) as e:
                        pendientes.append(i)
                        self.advertencias.append(
                            f"Trayectoria {i} no se pudo enviar al pool ({e}); se repite en serie")
                        continue
                    resultados[i] = resultado
                    self._registrar(i, len(tareas), resultado, advertencias)

        if pendientes:
            self.procesar_secuencial(worker, tareas, sorted(pendientes), resultados)
        return resultados

    def procesar(self, worker: Callable, tareas: List[Dict[str, Any]],
                 usar_paralelo: bool = True) -> List[Any]:
        """
        Ejecuta ``worker`` sobre cada tarea.

        Args:
            worker: Función a nivel de módulo ``worker(tarea) -> (resultado, advertencias)``.
            tareas: Lista de diccionarios de argumentos.
            usar_paralelo: Si True y hay más de un proceso, usa el pool.

        Returns:
            Lista de resultados en el orden de ``tareas`` (None si la tarea falló).
        """
        self.tareas_procesadas = 0
        self.tareas_fallidas = 0
        inicio = len(self.advertencias)
        if usar_paralelo and self.max_workers > 1 and len(tareas) > 1:
            try:
                return self.procesar_paralelo(worker, tareas)
            except (OSError, NotImplementedError, BrokenProcessPool) as e:
                # Se descartan las advertencias del intento parcial
                del self.advertencias[inicio:]
                self.advertencias.append(
                    f"Procesamiento paralelo no disponible ({e}); se continúa en serie")
                self.tareas_procesadas = 0
                self.tareas_fallidas = 0
        return self.procesar_secuencial(worker, tareas)
