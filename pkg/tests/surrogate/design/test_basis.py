import numpy as np
import pytest

from app.common.errors import ConfigurationError, DataError
from app.surrogate.design import SurrogateBasis, basis_expand, design_columns


def test_linear_basis():
    basis = SurrogateBasis()
    np.testing.assert_array_equal(basis_expand(basis, 2.5), [2.5])
    assert basis.column_labels() == ["linear"]


def test_bins_expand_with_clamping():
    basis = SurrogateBasis(kind="bins", edges=(0.0, 1.0, 2.0))
    np.testing.assert_array_equal(basis_expand(basis, 0.5), [1, 0, 0])
    np.testing.assert_array_equal(basis_expand(basis, 1.0), [0, 1, 0])
    np.testing.assert_array_equal(basis_expand(basis, 7.0), [0, 0, 1])
    np.testing.assert_array_equal(basis_expand(basis, -3.0), [1, 0, 0])


def test_design_columns_drop_reference_bin_and_missing():
    basis = SurrogateBasis(kind="bins", edges=(0.0, 1.0, 2.0))
    columns = design_columns(basis, np.array([0.5, 1.5, 2.5, np.nan]))
    np.testing.assert_array_equal(columns, [[0, 0], [1, 0], [0, 1], [0, 0]])
    assert basis.column_labels() == ["bin1", "bin2"]


def test_expand_rejects_missing_value():
    with pytest.raises(DataError):
        basis_expand(SurrogateBasis(), np.nan)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kind": "spline"},
        {"kind": "linear", "edges": (0.0, 1.0)},
        {"kind": "bins", "edges": (0.0,)},
        {"kind": "bins", "edges": (1.0, 0.0)},
    ],
)
def test_invalid_basis(kwargs):
    with pytest.raises(ConfigurationError):
        SurrogateBasis(**kwargs)
