from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sempri.exceptions import DataError
from sempri.superpixel import Segmentation, is_region_connected, region_adjacency, slic_segment


def flood_fill_connected(labels, q):
    """Independent BFS check that region ``q`` is one 4-connected piece."""
    pix = np.argwhere(labels == q)
    seen = {tuple(pix[0])}
    todo = deque(seen)
    h, w = labels.shape
    while todo:
        y, x = todo.popleft()
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < h and 0 <= nx < w and labels[ny, nx] == q and (ny, nx) not in seen:
                seen.add((ny, nx))
                todo.append((ny, nx))
    return len(seen) == len(pix)


def brute_adjacency(labels, n):
    adj = np.zeros((n, n), bool)
    h, w = labels.shape
    for y in range(h):
        for x in range(w):
            for ny, nx in ((y + 1, x), (y, x + 1)):
                if ny < h and nx < w and labels[y, x] != labels[ny, nx]:
                    adj[labels[y, x], labels[ny, nx]] = adj[labels[ny, nx], labels[y, x]] = True
    return adj


def smooth_image(rng, h, w):
    yy, xx = np.mgrid[0:h, 0:w]
    base = np.stack([np.sin(xx / 23.0 + c) * np.cos(yy / 17.0 - c) for c in range(3)], -1)
    return np.clip((base * 0.4 + 0.5) * 255 + rng.normal(0, 8, (h, w, 3)), 0, 255).astype(np.uint8)


def test_single_region(rng):
    seg = slic_segment(rng.integers(0, 256, (20, 30, 3), dtype=np.uint8), target_regions=1)
    assert seg.n_regions == 1 and not seg.labels.any()
    assert not region_adjacency(seg).any()


def test_uniform_quadrants():
    seg = slic_segment(np.full((120, 120, 3), 128, np.uint8), target_regions=4)
    assert seg.n_regions == 4
    assert np.all(np.abs(seg.sizes - 3600) <= 0.25 * 3600)
    centers = {(30, 30), (30, 90), (90, 30), (90, 90)}
    for q in range(4):
        ys, xs = np.nonzero(seg.labels == q)
        cy, cx = ys.mean(), xs.mean()
        assert min(np.hypot(cy - a, cx - b) for a, b in centers) < 10


def test_natural_size_image(rng):
    img = smooth_image(rng, 300, 400)
    seg = slic_segment(img, 200)
    assert 100 <= seg.n_regions <= 300
    assert seg.sizes.min() > 0 and seg.sizes.sum() == 300 * 400
    assert all(flood_fill_connected(seg.labels, q) for q in range(seg.n_regions))


def test_deterministic(rng):
    img = rng.integers(0, 256, (50, 70, 3), dtype=np.uint8)
    np.testing.assert_array_equal(slic_segment(img, 30).labels, slic_segment(img, 30).labels)


def test_raster_order_labels(rng):
    seg = slic_segment(smooth_image(rng, 40, 60), 20)
    _, first = np.unique(seg.labels.ravel(), return_index=True)
    assert np.all(np.diff(first) > 0)


@settings(max_examples=15, deadline=None)
@given(
    arrays(np.uint8, st.tuples(st.integers(4, 40), st.integers(4, 40), st.just(3))),
    st.integers(1, 40),
    st.floats(0.5, 40),
)
def test_invariants_random(img, target, compactness):
    target = min(target, img.shape[0] * img.shape[1])
    seg = slic_segment(img, target, compactness)
    assert seg.labels.shape == img.shape[:2]
    assert set(np.unique(seg.labels)) == set(range(seg.n_regions))
    assert all(is_region_connected(seg, q) for q in range(seg.n_regions))


def test_bad_target(rng):
    with pytest.raises(DataError):
        slic_segment(np.zeros((4, 4, 3), np.uint8), 0)
    with pytest.raises(DataError):
        slic_segment(np.zeros((4, 4, 3), np.uint8), 17)


class TestAdjacency:
    def test_halves(self):
        labels = np.zeros((6, 8), int)
        labels[:, 4:] = 1
        adj = region_adjacency(Segmentation.from_labels(labels))
        assert adj.sum() == 2 and adj[0, 1] and adj[1, 0]

    def test_quadrants(self):
        labels = np.zeros((6, 6), int)
        labels[:3, 3:] = 1
        labels[3:, :3] = 2
        labels[3:, 3:] = 3
        seg = Segmentation.from_labels(labels)
        adj = region_adjacency(seg)
        assert adj.sum() // 2 == 4
        assert not adj[0, 3] and not adj[1, 2]

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.int64, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=st.integers(0, 4)))
    def test_matches_brute_force(self, raw):
        seg = Segmentation.from_labels(raw)
        adj = region_adjacency(seg)
        np.testing.assert_array_equal(adj, brute_adjacency(seg.labels, seg.n_regions))
        assert np.array_equal(adj, adj.T) and not adj.diagonal().any()


def test_from_labels_renumbers():
    seg = Segmentation.from_labels(np.array([[7, 7, 3], [3, 9, 9]]))
    assert seg.labels.tolist() == [[0, 0, 1], [1, 2, 2]]
    assert seg.sizes.tolist() == [2, 2, 2]
    assert [p.tolist() for p in seg.region_pixel_lists] == [[0, 1], [2, 3], [4, 5]]
