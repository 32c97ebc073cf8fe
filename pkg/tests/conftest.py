import pytest

from ruralhq.corpus import Corpus
from ruralhq.synth import generate_synthetic_corpus


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    """Desk-scale corpus: 120 images, 15 raters, 16px rasters, 6 counties."""
    out = tmp_path_factory.mktemp("synth_small")
    synth = generate_synthetic_corpus(
        seed=1, n_images=120, raters_per_image=15, side=16, out_dir=out, n_counties=6
    )
    return synth, out


@pytest.fixture(scope="session")
def small_corpus(small_synth):
    synth, out = small_synth
    corpus = Corpus(root=out)
    corpus.ingest_images(synth.images)
    for ballot in synth.ballots:
        corpus.submit_ballot(ballot)
    return corpus


@pytest.fixture(scope="session")
def stat_synth(tmp_path_factory):
    """Bigger corpus for statistical bounds: 400 images over 20 counties."""
    out = tmp_path_factory.mktemp("synth_stat")
    synth = generate_synthetic_corpus(
        seed=3, n_images=400, raters_per_image=15, side=16, out_dir=out, n_counties=20
    )
    return synth, out
