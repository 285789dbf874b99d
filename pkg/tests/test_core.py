import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from oracles import EMPTY, EXTRA, NORMAL, alg2_kinds, coo_bruteforce
from saocds.core import (ConvDims, CooFormatError, CostCounters, DimensionError, IterKind,
                         NeuronParams, ScheduleError, SparseKernelCOO, SpikeTensor,
                         break_even_density, build_schedule, coo_bits_per_density, coo_decode,
                         coo_encode, coo_storage_bits, dense_storage_bits, ic_index, index_bits,
                         oc_index)


def kernels(max_oc=8, max_ic=8, max_kw=5):
    shape = st.tuples(st.integers(1, max_oc), st.integers(1, max_ic), st.integers(1, max_kw))
    return shape.flatmap(lambda s: hnp.arrays(np.int64, s, elements=st.sampled_from(
        [0, 0, 0, 0, 1, -1, 7, -300, 32767, -32768])))


# -- index packing ------------------------------------------------------------


@given(st.integers(1, 64), st.integers(1, 64), st.data())
def test_row_index_round_trip(n_ic, n_oc, data):
    oc = data.draw(st.integers(0, n_oc - 1))
    ic = data.draw(st.integers(0, n_ic - 1))
    ri = oc * n_ic + ic
    assert ic_index(ri, n_ic) == ic and oc_index(ri, n_ic) == oc


def test_index_examples():
    assert (ic_index(5, 2), oc_index(5, 2)) == (1, 2)
    assert [index_bits(n) for n in (1, 2, 3, 11, 32, 512, 2048)] == [1, 1, 2, 4, 5, 9, 11]
    with pytest.raises(ValueError):
        ic_index(3, 0)


# -- COO encoding -------------------------------------------------------------


@given(kernels())
def test_coo_matches_bruteforce_enumeration(w):
    k = coo_encode(w)
    assert [tuple(e) for e in k.entries] == coo_bruteforce(w)
    assert k.is_sorted()


@given(kernels())
def test_coo_round_trip(w):
    assert np.array_equal(coo_decode(coo_encode(w)), w)


def test_coo_encode_rejects_bad_input():
    with pytest.raises(DimensionError):
        coo_encode(np.zeros((2, 3)))
    with pytest.raises(TypeError):
        coo_encode(np.full((1, 1, 2), 0.5))
    with pytest.raises(CooFormatError):
        coo_encode(np.full((1, 1, 1), 40000))
    with pytest.raises(DimensionError):
        coo_encode(np.zeros((1, 1, 2), dtype=int), ConvDims(3, 1, 1))


@pytest.mark.parametrize("entries,msg", [
    ([(1, 4, 0)], "row index"),
    ([(1, 0, 3)], "column index"),
    ([(0, 0, 0)], "zero"),
    ([(1, 0, 0), (2, 0, 0)], "duplicate"),
    ([(40000, 0, 0)], "16 bits"),
])
def test_validate_reports_corruption(entries, msg):
    k = SparseKernelCOO.from_entries(ConvDims(3, 2, 2), entries)
    with pytest.raises(CooFormatError, match=msg):
        k.validate()


def test_mismatched_coo_lengths():
    with pytest.raises(CooFormatError):
        SparseKernelCOO(ConvDims(1, 1, 1), [1, 2], [0], [0])


def test_sorted_restores_canonical_order():
    k = SparseKernelCOO.from_entries(ConvDims(3, 2, 2), [(5, 3, 1), (2, 0, 2), (7, 0, 0)])
    assert not k.is_sorted()
    s = k.sorted()
    assert s.is_sorted() and [e.d for e in s.entries] == [7, 2, 5]
    with pytest.raises(ScheduleError):
        build_schedule(k)


def test_dims_validation():
    with pytest.raises(DimensionError):
        ConvDims(0, 1, 1)
    d = ConvDims(5, 32, 64, 16)
    assert d.in_w == 20 and d.n_weights == 10240 and d.kernel_shape == (64, 32, 5)


# -- storage accounting -------------------------------------------------------


@pytest.mark.parametrize("dims,ri,ci,be,dense,per_density", [
    (ConvDims(11, 2, 16), 5, 4, 0.64, 5632, 8800),
    (ConvDims(11, 16, 32), 9, 4, 16 / 29, 90112, 163328),
    (ConvDims(5, 32, 64), 11, 3, 16 / 30, 163840, 307200),
])
def test_storage_numbers_of_the_default_layers(dims, ri, ci, be, dense, per_density):
    assert dims.default_index_bits() == (ri, ci)
    assert break_even_density(16, ri, ci) == pytest.approx(be)
    assert dense_storage_bits(dims) == dense
    assert coo_bits_per_density(dims) == per_density


@given(kernels())
def test_coo_bits_scale_with_nnz(w):
    k = coo_encode(w)
    ri, ci = k.dims.default_index_bits()
    assert coo_storage_bits(k) == k.nnz * (16 + ri + ci)


def test_storage_rejects_narrow_index_fields():
    k = coo_encode(np.ones((16, 2, 11), dtype=int))
    with pytest.raises(ValueError, match="ri_bits"):
        coo_storage_bits(k, ri_bits=4)
    with pytest.raises(ValueError, match="ci_bits"):
        coo_storage_bits(k, ci_bits=3)
    with pytest.raises(ValueError):
        break_even_density(16, 0, 4)


# -- iteration schedule -------------------------------------------------------


@settings(max_examples=300)
@given(kernels(max_oc=10, max_ic=10))
def test_schedule_matches_literal_loop(w):
    k = coo_encode(w)
    assert build_schedule(k).kinds.tolist() == alg2_kinds(k.ri, k.dims.ic, k.dims.oc)


@settings(max_examples=300)
@given(kernels(max_oc=10, max_ic=10))
def test_schedule_structure(w):
    k = coo_encode(w)
    s = build_schedule(k)
    n = k.dims.ic
    assert s.reps == k.nnz + s.n_empty + s.n_extra
    assert s.n_normal == k.nnz
    # empties only happen while input channels are still arriving
    empties = np.flatnonzero(s.kinds == EMPTY)
    assert s.n_empty <= n - 1
    assert all(r <= n - 2 for r in empties)
    # one extra per output channel without nonzeros
    assert s.n_extra == k.dims.oc - len(set(k.oc_of.tolist()))
    normals = [a for kind, a in zip(s.kinds, s.args) if kind == NORMAL]
    assert normals == list(range(k.nnz))
    assert [a for kind, a in zip(s.kinds, s.args) if kind == EXTRA] == \
        sorted(set(range(k.dims.oc)) - set(k.oc_of.tolist()))


def test_empty_can_occur_after_the_first_output_channel():
    # oc 0 only uses channel 0, so oc 1 still waits for channel 3
    w = np.zeros((2, 4, 1), dtype=int)
    w[0, 0, 0] = 1
    w[1, 3, 0] = 1
    s = build_schedule(coo_encode(w))
    assert s.kinds.tolist() == [NORMAL, EMPTY, EMPTY, NORMAL]


def test_schedule_examples():
    # all-zero kernel: one extra per output channel
    s = build_schedule(coo_encode(np.zeros((3, 2, 2), dtype=int)))
    assert s.kinds.tolist() == [EXTRA] * 3 and s.args.tolist() == [0, 1, 2]
    # dense kernel never waits: oc 0 needs channel ic only after kw*ic iterations
    s = build_schedule(coo_encode(np.ones((4, 3, 2), dtype=int)))
    assert s.overhead == 0 and s.reps == 24
    # single nonzero on the last channel waits for it
    w = np.zeros((1, 4, 1), dtype=int)
    w[0, 3, 0] = 5
    s = build_schedule(coo_encode(w))
    assert s.kinds.tolist() == [EMPTY, EMPTY, EMPTY, NORMAL]
    assert s.summary() == {"reps": 4, "normal": 1, "empty": 3, "extra": 0}
    assert s.tags[3].kind is IterKind.NORMAL and s.tags[0].index == -1


# -- spike tensors, params, counters -----------------------------------------


def test_spike_tensor_validation():
    with pytest.raises(DimensionError):
        SpikeTensor(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        SpikeTensor(np.full((1, 1, 2), 2))
    x = SpikeTensor(np.array([[[1, 0, 1, 1]]]))
    assert x.rate == 0.75
    assert x != SpikeTensor.zeros(1, 1, 4)
    assert x == SpikeTensor(np.array([[[1, 0, 1, 1]]], dtype=np.int64))
    assert SpikeTensor.zeros(0, 2, 5).rate == 0.0
    with pytest.raises(ValueError):
        x.bits[0, 0, 0] = 0


def test_neuron_params_validation():
    p = NeuronParams.from_float(0.875, 1.0, 1.0)
    assert (int(p.alpha), int(p.theta), int(p.u_th0)) == (224, 256, 256)
    assert p.is_scalar()
    with pytest.raises(ValueError, match="exactly representable"):
        NeuronParams.from_float(0.1, 1.0, 1.0)
    with pytest.raises(ValueError, match="alpha"):
        NeuronParams(np.array(257), np.array(0), np.array(0))
    with pytest.raises(ValueError, match="theta"):
        NeuronParams(np.array(1), np.array(-1), np.array(0))
    with pytest.raises(TypeError):
        NeuronParams(np.array(0.5), np.array(0), np.array(0))
    b = NeuronParams(np.array([1, 2]), np.array(0), np.array(0)).broadcast((3, 2))
    assert b.alpha.shape == (3, 2)
    with pytest.raises(DimensionError):
        b.broadcast((2, 3))


def test_counters_add_and_bits():
    a = CostCounters(input_fetches=24, weight_fetches=96, accumulations=48)
    b = CostCounters(input_fetches=48, weight_fetches=12, accumulations=24)
    assert a.total_bits == 1560 and b.total_bits == 240
    c = a + b
    assert c.input_fetches == 72 and c.weight_bits == 108 * 16
    assert c.as_dict()["total_bits"] == 72 + 108 * 16
