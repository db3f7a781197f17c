import multiprocessing as mp
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar

T = TypeVar("T")


def parallel_starmap(func: Callable[..., T], args: Sequence[Tuple], workers: Optional[int] = 1) -> List[T]:
    """ Map ``func`` over argument tuples, in order

    With one worker (or a single task) the calls run in-process; otherwise a process pool is used.
    ``func`` must be a module-level function so that it can be pickled.

    :param func: Function to call
    :param args: One argument tuple per call
    :param workers: Number of processes
    :return: Results in the order of ``args``
    """
    args = list(args)
    if workers is None or workers <= 1 or len(args) <= 1:
        return [func(*a) for a in args]
    with mp.Pool(processes=min(workers, len(args))) as pool:
        return pool.starmap(func, args)


def chunked(items: Sequence[T], n_chunks: int) -> Iterable[Sequence[T]]:
    """ Split a sequence into at most ``n_chunks`` contiguous pieces """
    n_chunks = max(1, min(n_chunks, len(items)))
    size, rest = divmod(len(items), n_chunks)
    start = 0
    for k in range(n_chunks):
        stop = start + size + (1 if k < rest else 0)
        yield items[start:stop]
        start = stop
