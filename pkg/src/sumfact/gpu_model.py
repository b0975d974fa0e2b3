"""Analytical GPU performance models.

Shared-memory bank-conflict simulation over warp access patterns, XOR
swizzled tile layouts, matrix-fragment access patterns for the supported
warp-wide multiply-accumulate shapes, bandwidth/roofline calculators, and
the padding cost of irregular operator sizes.

Model (not hardware ground truth): 32 banks of 4 bytes; an access of W
bytes touches W/4 consecutive bank words; a warp request is processed in
transaction groups of 128 bytes worth of lanes; within a group the number
of serialized wavefronts is the largest count of distinct bank words that
land in one bank (identical words broadcast).
"""

from __future__ import annotations

from dataclasses import dataclass

N_BANKS = 32
BANK_BYTES = 4
GROUP_BYTES = 128

# device constants used by the bundled report scenarios
A100_SMS = 108
A100_CLOCK_GHZ = 1.27
A100_PEAK_TFLOPS = {"fp64": 19.5, "fp32": 19.5, "fp16": 312.0}
A100_VRAM_TBS = 2.0

BANDWIDTH_NOTE = (
    "shared bandwidth reported as the direct product 108 x 32 x 4 B x 1.27 GHz"
    " = 17.556 TB/s; the same inputs are sometimes quoted as 17.145 TB/s,"
    " which does not equal the product"
)


@dataclass
class LayoutFn:
    """Mapping from tile coordinates to linear word addresses."""

    rows: int
    cols: int
    word_bytes: int
    mapping: callable  # (row, col) -> word address within the tile
    name: str = "custom"
    swizzle_group: int | None = None
    swizzle_period: int | None = None

    def address(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise IndexError(f"({row}, {col}) outside {self.rows}x{self.cols} tile")
        addr = self.mapping(row, col)
        if not 0 <= addr < self.rows * self.cols:
            raise IndexError(f"layout maps ({row}, {col}) outside the tile")
        return addr

    def is_bijection(self) -> bool:
        seen = set()
        for r in range(self.rows):
            for c in range(self.cols):
                seen.add(self.address(r, c))
        return len(seen) == self.rows * self.cols


def row_major_layout(rows: int, cols: int, word_bytes: int) -> LayoutFn:
    return LayoutFn(rows, cols, word_bytes, lambda r, c: r * cols + c, name="row-major")


def xor_swizzle_layout(rows: int, cols: int, word_bytes: int, G: int,
                       period: int = 1) -> LayoutFn:
    """Row-major layout with the column index XOR-permuted per row.

    address(row, col) = row*cols + (col ^ base(row)) with
    base(row) = ((row // period) mod G) * (cols / G).  G = 1 is the
    identity layout.
    """
    if G < 1 or (G & (G - 1)) != 0:
        raise ValueError("swizzle group size must be a power of two")
    if period < 1 or (period & (period - 1)) != 0:
        raise ValueError("swizzle period must be a power of two")
    if cols % G != 0:
        raise ValueError("columns must be a multiple of the group size")
    if G > 1 and (cols & (cols - 1)) != 0:
        raise ValueError("swizzled tiles need power-of-two columns")
    width = cols // G

    def mapping(r, c):
        base = ((r // period) % G) * width
        return r * cols + (c ^ base)

    return LayoutFn(rows, cols, word_bytes, mapping,
                    name=f"xor-swizzle(G={G}, P={period})",
                    swizzle_group=G, swizzle_period=period)


@dataclass
class AccessPattern:
    """Per-phase lane requests against one tile.

    Each phase maps lane -> (row, col) or None for inactive lanes; every
    active lane reads ``access_bytes`` covering consecutive columns.
    """

    rows: int
    cols: int
    word_bytes: int
    access_bytes: int
    phases: list  # list of length-32 lists of (row, col) | None
    name: str = ""

    def __post_init__(self):
        for phase in self.phases:
            if len(phase) > 32:
                raise ValueError("a warp has at most 32 lanes")
        if self.access_bytes % self.word_bytes:
            raise ValueError("access width must be a multiple of the word size")

    def coverage(self) -> dict:
        """Multiplicity of every element over all phases."""
        counts = {}
        span = self.access_bytes // self.word_bytes
        for phase in self.phases:
            for lane in phase:
                if lane is None:
                    continue
                r, c = lane
                for i in range(span):
                    counts[(r, c + i)] = counts.get((r, c + i), 0) + 1
        return counts


@dataclass
class BankReport:
    phase_wavefronts: list
    total_wavefronts: int
    has_conflict: bool
    layout: str = ""
    pattern: str = ""

    def as_dict(self) -> dict:
        return {
            "pattern": self.pattern,
            "layout": self.layout,
            "phase_wavefronts": list(self.phase_wavefronts),
            "total_wavefronts": self.total_wavefronts,
            "has_conflict": self.has_conflict,
        }


def bank_trace(layout: LayoutFn, pattern: AccessPattern) -> BankReport:
    """Serialized-wavefront count of each access phase under a layout.

    A phase's count is the worst transaction group; a count above one
    means a bank conflict.
    """
    if (layout.rows, layout.cols) != (pattern.rows, pattern.cols):
        raise ValueError("layout and pattern tiles differ")
    if layout.word_bytes != pattern.word_bytes:
        raise ValueError("layout and pattern word sizes differ")
    span = pattern.access_bytes // pattern.word_bytes
    lanes_per_group = max(1, min(32, GROUP_BYTES // pattern.access_bytes))
    words_per_element = max(1, pattern.word_bytes // BANK_BYTES)

    phase_counts = []
    for phase in pattern.phases:
        active = [lane for lane in phase if lane is not None]
        worst = 1
        for g in range(0, len(active), lanes_per_group):
            group = active[g : g + lanes_per_group]
            per_bank: dict[int, set] = {}
            for r, c in group:
                for i in range(span):
                    addr = layout.address(r, c + i)
                    byte = addr * pattern.word_bytes
                    for j in range(words_per_element):
                        bank_word = byte // BANK_BYTES + j
                        per_bank.setdefault(bank_word % N_BANKS, set()).add(bank_word)
            worst = max(worst, max(len(s) for s in per_bank.values()))
        phase_counts.append(worst)
    total = sum(phase_counts)
    return BankReport(
        phase_wavefronts=phase_counts,
        total_wavefronts=total,
        has_conflict=any(c > 1 for c in phase_counts),
        layout=layout.name,
        pattern=pattern.name,
    )


def search_conflict_free_swizzle(pattern: AccessPattern, rows: int, cols: int,
                                 word_bytes: int) -> LayoutFn | None:
    """First XOR swizzle whose every phase runs in a single wavefront.

    Exhausts group sizes (and row periods) over the powers of two that
    divide the tile; absence of a hit is a valid result.
    """
    candidates = []
    g = 1
    while g <= cols:
        p = 1
        while p <= rows:
            candidates.append((g, p))
            p *= 2
        g *= 2
    for g, p in candidates:
        try:
            layout = xor_swizzle_layout(rows, cols, word_bytes, g, period=p)
        except ValueError:
            continue
        if not layout.is_bijection():
            continue
        report = bank_trace(layout, pattern)
        if report.total_wavefronts == len(pattern.phases):
            return layout
    return None


# ------------------------------------------------------ fragment patterns


def mma_fragment_pattern(shape: tuple, precision: str, role: str) -> AccessPattern:
    """Per-lane tile requests of one warp-wide multiply-accumulate operand.

    Supported shapes: (8, 8, 4) in fp64 and (16, 8, 16) in fp16.  The
    lane-to-element maps are model assumptions: fp64 operands are read
    element-wise in half-tile phases, fp16 operands arrive as 16-byte
    row segments (wide-load granularity), accumulators are written as
    16-byte vectors.
    """
    role = role.upper()
    if role not in ("A", "B", "C"):
        raise ValueError(f"unknown fragment role {role!r}")
    key = (tuple(shape), precision.lower())
    if key == ((8, 8, 4), "fp64"):
        if role == "A":  # 8x8 operand tile consumed as two 8x4 halves
            phases = [
                [(lane // 4, lane % 4 + 4 * p) for lane in range(32)] for p in (0, 1)
            ]
            return AccessPattern(8, 8, 8, 8, phases, name="fp64-A")
        if role == "B":  # two 4x8 halves, lanes walk columns
            phases = [
                [(lane % 4 + 4 * p, lane // 4) for lane in range(32)] for p in (0, 1)
            ]
            return AccessPattern(8, 8, 8, 8, phases, name="fp64-B")
        # C: one 8x8 accumulator store, a two-double vector per lane
        phases = [[(lane // 4, 2 * (lane % 4)) for lane in range(32)]]
        return AccessPattern(8, 8, 8, 16, phases, name="fp64-C")
    if key == ((16, 8, 16), "fp16"):
        if role == "A":  # 16x16 halves as four 8x8 segments, 16B per lane
            phase = [
                ((lane % 8) + 8 * (lane // 16), 8 * ((lane // 8) % 2))
                for lane in range(32)
            ]
            return AccessPattern(16, 16, 2, 16, [phase], name="fp16-A")
        if role == "B":  # 16x8 halves: one full 16-byte row per active lane
            phase = [(lane, 0) if lane < 16 else None for lane in range(32)]
            return AccessPattern(16, 8, 2, 16, [phase], name="fp16-B")
        # C: 16x8 fp32 accumulators, four floats per lane
        phase = [(lane // 2, 4 * (lane % 2)) for lane in range(32)]
        return AccessPattern(16, 8, 4, 16, [phase], name="fp16-C")
    raise ValueError(f"unsupported fragment shape {shape} in {precision}")


BANK_SCENARIOS = ("fp64-naive", "fp64-swizzled", "fp16-naive", "fp16-swizzled")


def bank_scenario(name: str) -> list[BankReport]:
    """Bank reports of the named kernel scenario, one per fragment role."""
    if name not in BANK_SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; pick one of {BANK_SCENARIOS}")
    precision = "fp64" if name.startswith("fp64") else "fp16"
    shape = (8, 8, 4) if precision == "fp64" else (16, 8, 16)
    swizzled = name.endswith("swizzled")
    reports = []
    for role in ("A", "B", "C"):
        pattern = mma_fragment_pattern(shape, precision, role)
        if swizzled:
            layout = search_conflict_free_swizzle(
                pattern, pattern.rows, pattern.cols, pattern.word_bytes
            )
            if layout is None:
                raise RuntimeError(f"no conflict-free swizzle for {pattern.name}")
        else:
            layout = row_major_layout(pattern.rows, pattern.cols, pattern.word_bytes)
        reports.append(bank_trace(layout, pattern))
    return reports


# ------------------------------------------------------------- rooflines


def shared_bandwidth(sms: int, banks: int, word_bytes: int, clock_ghz: float) -> float:
    """Aggregate shared-memory bandwidth in TB/s: SMs x banks x word x clock."""
    if min(sms, banks, word_bytes) <= 0 or clock_ghz <= 0:
        raise ValueError("all bandwidth inputs must be positive")
    return sms * banks * word_bytes * clock_ghz / 1000.0


def roofline(bandwidth_tbs: float, flops: float, bytes_read: float,
             bytes_written: float) -> float:
    """Shared-memory ceiling in TFLOP/s: B * F / (d_r + d_w)."""
    traffic = bytes_read + bytes_written
    if traffic <= 0:
        raise ValueError("traffic must be positive")
    return bandwidth_tbs * flops / traffic


def vram_roofline(peak_tflops: float, mem_bw_tbs: float,
                  arithmetic_intensity: float) -> float:
    """Device-memory ceiling: min(peak, AI x bandwidth)."""
    if peak_tflops <= 0 or mem_bw_tbs <= 0 or arithmetic_intensity <= 0:
        raise ValueError("all roofline inputs must be positive")
    return min(peak_tflops, arithmetic_intensity * mem_bw_tbs)


def padding_cost(n: int, supported, d: int = 3) -> tuple[int, float]:
    """Smallest supported operator size above n and the wasted-work ratio.

    The contraction cost model scales with one matrix dimension and d
    tensor extents, hence the exponent d+1.
    """
    supported = sorted(int(s) for s in supported)
    if not supported:
        raise ValueError("need at least one supported size")
    if n > supported[-1]:
        raise ValueError(f"size {n} exceeds the largest supported {supported[-1]}")
    if n < 1:
        raise ValueError("size must be positive")
    padded = next(s for s in supported if s >= n)
    return padded, (padded / n) ** (d + 1)
