"""Poster curation: deduplication, score filters and region masks."""

from posterkit.curation.dedup import dhash, exact_dedup, hamming, md5_digest, near_dedup
from posterkit.curation.masks import (
    SizeClass,
    TextRegionMask,
    build_masks,
    classify_mask,
    parse_text_regions,
    rasterize_weight_map,
    save_weight_map,
)
from posterkit.curation.records import PosterRecord
from posterkit.curation.scoring import binary_filter, hps_filter, score_binary

__all__ = [
    "PosterRecord",
    "SizeClass",
    "TextRegionMask",
    "binary_filter",
    "build_masks",
    "classify_mask",
    "dhash",
    "exact_dedup",
    "hamming",
    "hps_filter",
    "md5_digest",
    "near_dedup",
    "parse_text_regions",
    "rasterize_weight_map",
    "save_weight_map",
    "score_binary",
]
