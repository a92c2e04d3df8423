import numpy as np
import pytest

from reconfmem.mlp import LESION_TYPES
from reconfmem.synth import SynthSpec, synth_dataset, synth_images

SMALL = SynthSpec(n_images=3)


def test_no_lesions_means_all_negative():
    res = synth_dataset(SynthSpec(n_images=3, lesions_per_type=0), seed=1)
    assert res.rows and all(r["label"] == 0 for r in res.rows)


def test_planted_objects_are_recovered_once():
    res = synth_dataset(SMALL, seed=0)
    planted = sum(len(img.objects) for img in res.images)
    assert len(res.rows) == planted
    assert sum(r["label"] for r in res.rows) == 4 * SMALL.n_images
    per_type = {t: sum(r["lesion_type"] == t for r in res.rows) for t in LESION_TYPES}
    assert set(per_type.values()) == {(4 + SMALL.distractors) * SMALL.n_images // 4}


def test_determinism():
    a, b = synth_dataset(SMALL, seed=3), synth_dataset(SMALL, seed=3)
    assert a.rows == b.rows and np.array_equal(a.features, b.features)
    c = synth_images(SMALL, seed=4)
    assert not np.array_equal(a.images[0].rgb, c[0].rgb)


def test_dataset_view():
    res = synth_dataset(SMALL, seed=0)
    ds = res.dataset()
    assert ds.x.shape == (len(res.rows), 81)
    assert ds.ids[0] == f"{res.rows[0]['image']}:{res.rows[0]['candidate_id']}"


@pytest.mark.parametrize("kw", [dict(lesions_per_type=5), dict(red_contrast=(0.9, 0.5)), dict(n_images=-1)])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        SynthSpec(**kw)
