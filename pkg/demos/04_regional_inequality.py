"""Hierarchical aggregation, Gini inequality, and indicator correlations.

Aggregates crowd scores to village/township/county level, computes the
Gini of per-capita housing area with and without quality weighting, joins
county indicators for Pearson correlations, and prints directional gaps.
"""

import tempfile

import numpy as np

from ruralhq.corpus import Corpus
from ruralhq.geostat import (
    aggregate_regions,
    directional_gap_report,
    gini,
    indicator_correlations,
    IndicatorRow,
    weighted_inequality_report,
)
from ruralhq.synth import (
    generate_synthetic_corpus,
    synthetic_indicators,
    synthetic_region_classes,
)

workdir = tempfile.mkdtemp(prefix="inequality_demo_")
synth = generate_synthetic_corpus(
    seed=7, n_images=300, raters_per_image=15, side=16, out_dir=workdir, n_counties=20
)
corpus = Corpus(root=workdir)
corpus.ingest_images(synth.images)
for ballot in synth.ballots:
    corpus.submit_ballot(ballot)

means = {i: corpus.distribution_of(i).mean for i in corpus.tallied_images()}

# Aggregation: a county mean is the flat mean over its images, never a
# mean of village means. Villages need more than 5 images to count.
for level in ("village", "township", "county"):
    aggs = aggregate_regions([corpus.image(i) for i in sorted(means)], means, level)
    included = [a for a in aggs if a.included]
    print(f"{level:9s}: {len(aggs)} regions, {len(included)} above the image threshold")

county = aggregate_regions([corpus.image(i) for i in sorted(means)], means, "county")

# Gini basics.
print(f"\ngini(1,2,3,4) = {gini([1, 2, 3, 4])}")
print(f"gini(0,0,0,1) = {gini([0, 0, 0, 1])}")

# Quality-weighted housing assets: since quality rises with area in this
# corpus, weighting area by quality makes the distribution less equal.
area = {}
for record in synth.images:
    area.setdefault(record.geo.county_code, []).append(record.area_per_capita)
county_area = [float(np.mean(area[a.county_code])) for a in county]
county_quality = [a.mean_quality for a in county]
report = weighted_inequality_report(county_area, county_quality)
print(
    f"\ngini of per-capita area: {report.gini_area:.4f}; quality-weighted: "
    f"{report.gini_weighted:.4f} ({100 * report.relative_increase:+.1f}%)"
)

# County indicators: income indicators rise with county quality here.
rows = [
    IndicatorRow(**r)
    for r in synthetic_indicators(
        {a.county_code: a.mean_quality for a in county},
        {a.county_code: ar for a, ar in zip(county, county_area)},
        seed=7,
    )
]
for result in indicator_correlations(county, rows):
    print(f"  {result.indicator:24s} r = {result.r:+.3f} over {result.n_joined} counties")

# Directional gaps from a user-supplied class map.
classes = {
    row["county_code"]: (row["ns_class"], row["ew_class"])
    for row in synthetic_region_classes([a.county_code for a in county])
}
gaps = directional_gap_report(county, classes)
print("\nclass means:", {k: (f"{v:.2f}" if v is not None else None) for k, v in gaps.class_means.items()})
print("gaps:", {k: (f"{v:+.3f}" if v is not None else None) for k, v in gaps.gaps.items()})
