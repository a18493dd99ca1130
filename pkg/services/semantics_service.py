"""
Semantics service: the standard interpretation of diagrams as linear maps.
"""
import cmath
import logging
import random
from typing import Dict, Hashable, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import Settings, settings as default_settings
from exceptions import ArityMismatchError, ResourceLimitError, RingDivisionError
from models import Diagram, VertexType
from services.diagram_service import STATE_SYMBOLS, DiagramService
from utils.phase import Phase
from utils.ring import ONE, ExactScalar, omega_power
from utils.tensor import ExactMatrix, ExactTensor, FloatMatrix

logger = logging.getLogger(__name__)

Matrix = Union[ExactMatrix, FloatMatrix]
Label = Tuple[str, int]


class _ExactBackend:
    """Generator tensors over Z[ω, 1/√2]."""

    name = "exact"

    @staticmethod
    def spider(kind: VertexType, phase: Phase, legs: int) -> ExactTensor:
        j = phase.eighths
        rot = np.array(omega_power(j), dtype=np.int64)
        if legs == 0:
            return ExactTensor(np.array([1, 0, 0, 0], dtype=np.int64) + rot)
        data = np.zeros((2,) * legs + (4,), dtype=np.int64)
        if kind == VertexType.Z:
            data[(0,) * legs + (0,)] = 1
            data[(1,) * legs] += rot
            return ExactTensor(data)
        if kind == VertexType.X:
            parity = np.indices((2,) * legs).sum(axis=0) % 2
            sign = np.where(parity == 0, 1, -1)
            data[..., 0] = 1
            data += sign[..., None] * rot
            return ExactTensor(data, legs)
        if kind == VertexType.H:
            if legs != 2:
                raise ArityMismatchError(f"H must have two legs, got {legs}")
            data[..., 0] = np.array([[1, 1], [1, -1]])
            return ExactTensor(data, 1)
        raise ValueError(f"No generator for {kind}")

    @staticmethod
    def wire() -> ExactTensor:
        return ExactMatrix.identity(2)

    @staticmethod
    def unit() -> ExactTensor:
        return ExactTensor.scalar(ONE)

    @staticmethod
    def contract(a: ExactTensor, b: ExactTensor, axes_a: Sequence[int], axes_b: Sequence[int]) -> ExactTensor:
        return a.contract(b, axes_a, axes_b)

    @staticmethod
    def trace(a: ExactTensor, i: int, j: int) -> ExactTensor:
        return a.trace(i, j)

    @staticmethod
    def finish(t: ExactTensor, perm: Sequence[int], rows: int, cols: int) -> ExactMatrix:
        return ExactMatrix.of(t.transpose(perm).reshape((rows, cols)))


class _FloatBackend:
    """Generator tensors in double precision."""

    name = "float"

    @staticmethod
    def spider(kind: VertexType, phase: Phase, legs: int) -> np.ndarray:
        rot = cmath.exp(1j * cmath.pi * float(phase.value))
        if legs == 0:
            return np.array(1 + rot, dtype=np.complex128)
        if kind == VertexType.Z:
            data = np.zeros((2,) * legs, dtype=np.complex128)
            data[(0,) * legs] = 1
            data[(1,) * legs] += rot
            return data
        if kind == VertexType.X:
            parity = np.indices((2,) * legs).sum(axis=0) % 2
            return (1 + rot * np.where(parity == 0, 1, -1)) / (2 ** (legs / 2))
        if kind == VertexType.H:
            if legs != 2:
                raise ArityMismatchError(f"H must have two legs, got {legs}")
            return np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
        raise ValueError(f"No generator for {kind}")

    @staticmethod
    def wire() -> np.ndarray:
        return np.eye(2, dtype=np.complex128)

    @staticmethod
    def unit() -> np.ndarray:
        return np.array(1, dtype=np.complex128)

    @staticmethod
    def contract(a: np.ndarray, b: np.ndarray, axes_a: Sequence[int], axes_b: Sequence[int]) -> np.ndarray:
        return np.tensordot(a, b, axes=(list(axes_a), list(axes_b)))

    @staticmethod
    def trace(a: np.ndarray, i: int, j: int) -> np.ndarray:
        return np.trace(a, axis1=i, axis2=j)

    @staticmethod
    def finish(t: np.ndarray, perm: Sequence[int], rows: int, cols: int) -> FloatMatrix:
        return FloatMatrix(np.transpose(t, perm).reshape((rows, cols)))


EXACT = _ExactBackend()
FLOAT = _FloatBackend()


class SemanticsService:
    """Service for evaluating diagrams and comparing linear maps."""

    @staticmethod
    def generator_matrix(kind: VertexType, phase: Phase = Phase(0), n_in: int = 1, n_out: int = 1) -> ExactMatrix:
        """Matrix of a single generator, rows indexed by outputs."""
        if kind == VertexType.H and (n_in, n_out) != (1, 1):
            raise ArityMismatchError(f"H must have arity (1, 1), got ({n_in}, {n_out})")
        if not kind.is_spider and kind != VertexType.H:
            raise ArityMismatchError(f"{kind} is not a generator")
        t = EXACT.spider(kind, phase, n_in + n_out)
        return ExactMatrix.of(t.reshape((2 ** n_out, 2 ** n_in)))

    @staticmethod
    def is_exact(d: Diagram) -> bool:
        return all(d.phase(v).is_clifford_t for v in d.interior())

    @staticmethod
    def evaluate(
        d: Diagram,
        exact: Optional[bool] = None,
        config: Optional[Settings] = None,
        order_seed: Optional[int] = None,
    ) -> Matrix:
        """Contract the diagram into a 2^outputs × 2^inputs matrix.

        Exact arithmetic is used whenever every phase is a multiple of π/4, unless
        ``exact=False``. ``order_seed`` replaces the greedy contraction order by a
        seeded random one.
        """
        config = config or default_settings
        if exact is None:
            exact = SemanticsService.is_exact(d)
        elif exact and not SemanticsService.is_exact(d):
            raise ArityMismatchError("Exact evaluation needs every phase to be a multiple of 1/4")
        backend = EXACT if exact else FLOAT
        return SemanticsService._contract(d, backend, config.dimension_cap, order_seed)

    @staticmethod
    def evaluate_float(d: Diagram, config: Optional[Settings] = None) -> FloatMatrix:
        return SemanticsService.evaluate(d, exact=False, config=config)

    @staticmethod
    def _contract(d: Diagram, backend, cap: int, order_seed: Optional[int]) -> Matrix:
        boundary = set(d.inputs) | set(d.outputs)
        tensors: List[Tuple[object, List[Label]]] = []

        def label_for(half, owner: int) -> Label:
            eid, end = half
            other = d.edge(eid)[1 - end]
            if other in boundary and other != owner:
                return ("b", other)
            return ("e", eid)

        for v in d.interior():
            vx = d.vertex(v)
            halves = d.half_edges(v)
            tensors.append((backend.spider(vx.kind, vx.phase, len(halves)), [label_for(h, v) for h in halves]))
        for _, x, y in d.iter_edges():
            if x in boundary and y in boundary:
                tensors.append((backend.wire(), [("b", x), ("b", y)]))

        # self-loops and repeated labels first
        tensors = [SemanticsService._self_trace(backend, t, labels) for t, labels in tensors]

        rng = random.Random(order_seed) if order_seed is not None else None
        while len(tensors) > 1:
            i, j = SemanticsService._pick_pair(tensors, rng)
            (ta, la), (tb, lb) = tensors[i], tensors[j]
            shared = [lab for lab in la if lab in lb]
            result_labels = [lab for lab in la if lab not in shared] + [lab for lab in lb if lab not in shared]
            if 2 ** len(result_labels) > cap:
                logger.error(f"Contraction cut of {len(result_labels)} wires exceeds the dimension cap {cap}")
                raise ResourceLimitError(
                    f"Intermediate tensor 2^{len(result_labels)} exceeds cap {cap}; cut: {result_labels}"
                )
            merged = backend.contract(ta, tb, [la.index(s) for s in shared], [lb.index(s) for s in shared])
            tensors = [t for n, t in enumerate(tensors) if n not in (i, j)] + [(merged, result_labels)]

        final, labels = tensors[0] if tensors else (backend.unit(), [])
        order = [("b", v) for v in d.outputs] + [("b", v) for v in d.inputs]
        if sorted(labels) != sorted(order):
            raise ArityMismatchError(f"Open wires {labels} do not match the boundary {order}")
        perm = [labels.index(lab) for lab in order]
        return backend.finish(final, perm, 2 ** len(d.outputs), 2 ** len(d.inputs))

    @staticmethod
    def _self_trace(backend, tensor, labels: List[Label]):
        labels = list(labels)
        while True:
            dup = next((lab for lab in labels if labels.count(lab) > 1), None)
            if dup is None:
                return tensor, labels
            i = labels.index(dup)
            j = labels.index(dup, i + 1)
            tensor = backend.trace(tensor, i, j)
            labels = [lab for n, lab in enumerate(labels) if n not in (i, j)]

    @staticmethod
    def _pick_pair(tensors: List[Tuple[object, List[Label]]], rng: Optional[random.Random]) -> Tuple[int, int]:
        candidates = []
        for i in range(len(tensors)):
            li = set(tensors[i][1])
            for j in range(i + 1, len(tensors)):
                lj = tensors[j][1]
                shared = sum(1 for lab in lj if lab in li)
                if shared:
                    size = len(li) + len(lj) - 2 * shared
                    candidates.append((size, i, j))
        if not candidates:
            sizes = sorted((len(labels), n) for n, (_, labels) in enumerate(tensors))
            i, j = sorted((sizes[0][1], sizes[1][1]))
            return i, j
        if rng is not None:
            _, i, j = rng.choice(candidates)
            return i, j
        _, i, j = min(candidates)
        return i, j

    # comparison

    @staticmethod
    def proportional_equal(a: Matrix, b: Matrix, tolerance: float = 1e-9) -> Tuple[bool, Optional[Union[ExactScalar, complex]]]:
        """Decide a = z·b for some nonzero z, returning z when it exists."""
        if a.shape != b.shape:
            raise ArityMismatchError(f"Cannot compare a {a.shape} matrix with a {b.shape} matrix")
        if isinstance(a, ExactMatrix) and isinstance(b, ExactMatrix):
            return SemanticsService._exact_proportional(a, b)
        return SemanticsService._float_proportional(a.to_complex(), b.to_complex(), tolerance)

    @staticmethod
    def _exact_proportional(a: ExactMatrix, b: ExactMatrix) -> Tuple[bool, Optional[ExactScalar]]:
        a_mask, b_mask = a.nonzero_mask(), b.nonzero_mask()
        if not b_mask.any():
            return (True, ONE) if not a_mask.any() else (False, None)
        if not a_mask.any() or not np.array_equal(a_mask, b_mask):
            return False, None
        pivot = b.first_nonzero()
        ap, bp = a.entry(pivot), b.entry(pivot)
        try:
            z = ap / bp
        except RingDivisionError:
            logger.debug("Proportionality witness leaves the ring, cross-multiplying")
            return (a.scaled(bp) == b.scaled(ap)), None
        return (True, z) if a == b.scaled(z) else (False, None)

    @staticmethod
    def _float_proportional(a: np.ndarray, b: np.ndarray, tolerance: float) -> Tuple[bool, Optional[complex]]:
        b_zero = np.all(np.abs(b) <= tolerance)
        a_zero = np.all(np.abs(a) <= tolerance)
        if b_zero or a_zero:
            return (True, 1 + 0j) if (a_zero and b_zero) else (False, None)
        flat = int(np.argmax(np.abs(b).reshape(-1) > tolerance))
        z = a.reshape(-1)[flat] / b.reshape(-1)[flat]
        ok = np.allclose(a, z * b, atol=tolerance, rtol=0)
        return (True, complex(z)) if ok else (False, None)

    @staticmethod
    def diagrams_proportional(a: Diagram, b: Diagram, config: Optional[Settings] = None):
        return SemanticsService.proportional_equal(
            SemanticsService.evaluate(a, config=config), SemanticsService.evaluate(b, config=config)
        )

    # basis states

    @staticmethod
    def apply_to_basis(d: Diagram, bits: str, config: Optional[Settings] = None) -> ExactMatrix:
        """Exact image of a product of 0/1/+/− states under the diagram."""
        if len(bits) != d.arity[0]:
            raise ArityMismatchError(f"Basis string {bits!r} has {len(bits)} symbols, diagram has {d.arity[0]} inputs")
        for symbol in bits:
            if symbol not in STATE_SYMBOLS:
                raise ArityMismatchError(f"Unknown basis symbol {symbol!r} in {bits!r}")
        prep = DiagramService.tensor_all([DiagramService.state(s) for s in bits])
        column = SemanticsService.evaluate(DiagramService.compose(prep, d), exact=True, config=config)
        # each single-wire state diagram carries a factor √2
        return ExactMatrix.of(column.divide_sqrt2(len(bits)))

    @staticmethod
    def basis_vector(bits: str) -> ExactMatrix:
        """Column vector of a product state written over 0, 1, + and -."""
        vec = ExactMatrix.identity(1)
        half = ExactScalar(1, k=1)
        single = {
            "0": [ExactScalar(1), ExactScalar(0)],
            "1": [ExactScalar(0), ExactScalar(1)],
            "+": [half, half],
            "-": [half, -half],
        }
        for symbol in bits:
            if symbol not in single:
                raise ArityMismatchError(f"Unknown basis symbol {symbol!r}")
            vec = vec.kron(ExactMatrix.column_vector(single[symbol]))
        return vec

    @staticmethod
    def ket_sum(strings: Sequence[str]) -> ExactMatrix:
        """Sum of computational basis kets, e.g. ["000", "111"]."""
        n = len(strings[0])
        entries = [ExactScalar() for _ in range(2 ** n)]
        for s in strings:
            entries[int(s, 2)] = entries[int(s, 2)] + ONE
        return ExactMatrix.column_vector(entries)
