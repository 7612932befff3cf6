"""Area filtering, tolerance clustering, and the per-image verdict.

The defect signal is the "intersection": areas from all windows of one image
are pooled, sorted ascending, and grouped sequentially — an area joins the
current group while it stays within ``tolerance`` of the group's running
mean, otherwise it starts a new group. The group maximizing the sum of its
areas is selected; its mean is the intersection, unless it is a singleton
(a region seen only once is treated as noise and scores 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .raster import ImageRaster, WindowSpec, preprocess, split_image
from .segmenter import MaskRecord, Segmenter, SegmenterConfig

AREA_MODES = ("bbox", "pixel_count")

FAULTY = "faulty"
FAULT_FREE = "fault_free"


@dataclass(frozen=True)
class AreaThresholds:
    """Strict lower/upper bounds on retained mask areas (px^2)."""

    lower: float
    upper: float

    def __post_init__(self):
        if not 0 <= self.lower < self.upper:
            raise ValueError(f"need 0 <= lower < upper, got ({self.lower}, {self.upper})")


@dataclass(frozen=True)
class AreaSample:
    """One retained area with provenance for overlays and debugging."""

    area: int
    window_origin: tuple[int, int]
    mask_index: int

    def __post_init__(self):
        if self.area <= 0:
            raise ValueError(f"area must be positive, got {self.area}")


@dataclass(frozen=True)
class ClusterParams:
    tolerance: float = 10.0
    area_mode: str = "bbox"

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")
        if self.area_mode not in AREA_MODES:
            raise ValueError(f"area_mode must be one of {AREA_MODES}, got {self.area_mode!r}")


@dataclass
class ClusterOutcome:
    clusters: list[list[AreaSample]]
    selected_index: int | None
    intersection: float


def compute_areas(
    masks: list[MaskRecord],
    thresholds: AreaThresholds,
    mode: str = "bbox",
    window_origin: tuple[int, int] = (0, 0),
) -> list[AreaSample]:
    """Filter masks to areas strictly inside (lower, upper), input order kept.

    Area is bounding-box width x height in ``bbox`` mode, the foreground
    pixel count in ``pixel_count`` mode.
    """
    if mode not in AREA_MODES:
        raise ValueError(f"area_mode must be one of {AREA_MODES}, got {mode!r}")
    out = []
    for i, m in enumerate(masks):
        area = m.bbox_area if mode == "bbox" else m.pixel_count
        if thresholds.lower < area < thresholds.upper:
            out.append(AreaSample(area=area, window_origin=window_origin, mask_index=i))
    return out


def _sample_order(s: AreaSample) -> tuple:
    # Total order: permutations of the input always sort identically,
    # including provenance of equal-area samples.
    return (s.area, s.window_origin[0], s.window_origin[1], s.mask_index)


def cluster_areas(samples: list[AreaSample], params: ClusterParams) -> ClusterOutcome:
    """Sequential tolerance clustering over sorted areas; see module docstring.

    Selection ties (equal sums) prefer the larger cluster, then the smaller
    mean, then the earlier cluster in sorted order.
    """
    if not samples:
        return ClusterOutcome(clusters=[], selected_index=None, intersection=0.0)
    ordered = sorted(samples, key=_sample_order)
    clusters: list[list[AreaSample]] = []
    current = [ordered[0]]
    current_sum = ordered[0].area
    for s in ordered[1:]:
        if abs(s.area - current_sum / len(current)) <= params.tolerance:
            current.append(s)
            current_sum += s.area
        else:
            clusters.append(current)
            current = [s]
            current_sum = s.area
    clusters.append(current)

    best = 0
    best_key = None
    for i, c in enumerate(clusters):
        total = sum(s.area for s in c)
        key = (total, len(c), -(total / len(c)))
        if best_key is None or key > best_key:
            best = i
            best_key = key
    selected = clusters[best]
    if len(selected) >= 2:
        intersection = sum(s.area for s in selected) / len(selected)
    else:
        intersection = 0.0
    return ClusterOutcome(clusters=clusters, selected_index=best, intersection=intersection)


def decide(intersection: float, decision_threshold: float) -> str:
    """Faulty iff the intersection strictly exceeds the decision threshold."""
    if decision_threshold < 0:
        raise ValueError(f"decision_threshold must be >= 0, got {decision_threshold}")
    return FAULTY if intersection > decision_threshold else FAULT_FREE


@dataclass
class AnalysisResult:
    """Per-image outcome plus the mask provenance needed to render overlays."""

    image_id: str
    verdict: str
    score: float
    outcome: ClusterOutcome
    retained: list[AreaSample]
    window_masks: list[tuple[tuple[int, int], list[MaskRecord]]] = field(repr=False)

    def to_report(self) -> dict:
        return {
            "image_id": self.image_id,
            "verdict": self.verdict,
            "score": self.score,
            "intersection": self.outcome.intersection,
            "clusters": [[s.area for s in c] for c in self.outcome.clusters],
            "retained_samples": [
                {"area": s.area, "window": list(s.window_origin), "mask_index": s.mask_index}
                for s in self.retained
            ],
            "windows": [
                {"window": [r, c], "masks": [m.to_dict() for m in masks]}
                for (r, c), masks in self.window_masks
                if masks
            ],
        }


def analyze_image(
    image: ImageRaster,
    window_spec: WindowSpec,
    seg_config: SegmenterConfig,
    thresholds: AreaThresholds,
    cluster_params: ClusterParams,
    decision_threshold: float,
    image_id: str = "",
    normalize_brightness: bool = False,
    edge_complete: bool = False,
    segmenter: Segmenter | None = None,
) -> AnalysisResult:
    """Full per-image pipeline: preprocess, window, segment, filter, cluster, decide.

    Pass a shared `segmenter` when scoring many images so external backends
    keep one connection; it is then left open for the caller to close.
    """
    gray = preprocess(image, normalize_brightness)
    windows = split_image(gray, window_spec, edge_complete)
    retained: list[AreaSample] = []
    window_masks: list[tuple[tuple[int, int], list[MaskRecord]]] = []
    seg = segmenter if segmenter is not None else Segmenter(seg_config)
    try:
        for w in windows:
            masks = seg.segment(w, image_id)
            origin = (w.origin_row, w.origin_col)
            window_masks.append((origin, masks))
            retained.extend(
                compute_areas(masks, thresholds, cluster_params.area_mode, origin)
            )
    finally:
        if segmenter is None:
            seg.close()
    outcome = cluster_areas(retained, cluster_params)
    verdict = decide(outcome.intersection, decision_threshold)
    return AnalysisResult(
        image_id=image_id,
        verdict=verdict,
        score=outcome.intersection,
        outcome=outcome,
        retained=retained,
        window_masks=window_masks,
    )
