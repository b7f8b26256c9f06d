"""Dataset encoding, column specs, transform fitting, CSV round-trips."""

import math

import numpy as np
import pytest

from glfm.data import (
    AttributeKind,
    AttributeSpec,
    DataMatrix,
    decode_cell,
    fit_transform_params,
    fit_transforms,
    format_cell,
    load_dataset,
    parse_attribute_spec,
    render_csv,
)

CSV_MIXED = (
    "r1,p1,c1,o1,n1\n"
    "0.5,1.2,red,2,3\n"
    "-1.0,0.4,blue,1,0\n"
    ",2.2,red,,7\n"
    "2.5,,green,3,1\n"
)

SPEC_MIXED = (
    "r1,real\n"
    "p1,positivereal\n"
    "c1,categorical,3\n"
    "o1,ordinal,3\n"
    "n1,count\n"
)


def test_kind_tags_roundtrip():
    for tag in ("real", "positivereal", "categorical", "ordinal", "count"):
        kind = AttributeKind.from_tag(tag)
        assert kind.value == tag
    with pytest.raises(ValueError):
        AttributeKind.from_tag("complex")
    assert AttributeKind.CATEGORICAL.is_discrete_finite
    assert AttributeKind.ORDINAL.is_discrete_finite
    assert not AttributeKind.COUNT.is_discrete_finite
    assert AttributeKind.REAL.is_continuous
    assert AttributeKind.POSITIVE_REAL.is_continuous
    assert not AttributeKind.COUNT.is_continuous


def test_attribute_spec_validation():
    with pytest.raises(ValueError):
        AttributeSpec("x", AttributeKind.REAL, w=0.0)
    with pytest.raises(ValueError):
        AttributeSpec("x", AttributeKind.CATEGORICAL)  # R_d required
    with pytest.raises(ValueError):
        AttributeSpec("x", AttributeKind.ORDINAL, R_d=1)
    with pytest.raises(ValueError):
        AttributeSpec("x", AttributeKind.REAL, R_d=3)
    with pytest.raises(ValueError):
        AttributeSpec("x", AttributeKind.COUNT, external_preprocess="log1p")
    with pytest.raises(ValueError):
        AttributeSpec("x", AttributeKind.REAL, external_preprocess="sqrt")
    cat = AttributeSpec("c", AttributeKind.CATEGORICAL, R_d=4)
    assert cat.S_d == 4
    assert AttributeSpec("r", AttributeKind.REAL).S_d == 1


def test_parse_attribute_spec():
    specs = parse_attribute_spec(SPEC_MIXED)
    assert [s.name for s in specs] == ["r1", "p1", "c1", "o1", "n1"]
    assert specs[2].R_d == 3
    assert specs[3].R_d == 3
    assert specs[4].R_d is None

    with_pre = parse_attribute_spec("a,real,log1p\nb,positivereal,none\n")
    assert with_pre[0].external_preprocess == "log1p"
    assert with_pre[1].external_preprocess is None


def test_parse_attribute_spec_errors():
    with pytest.raises(ValueError, match="need at least"):
        parse_attribute_spec("lonely\n")
    with pytest.raises(ValueError, match="needs R_d"):
        parse_attribute_spec("c,categorical\n")
    with pytest.raises(ValueError, match="bad R_d"):
        parse_attribute_spec("c,categorical,many\n")
    with pytest.raises(ValueError, match="R_d supplied"):
        parse_attribute_spec("r,real,3\n")
    with pytest.raises(ValueError, match="trailing"):
        parse_attribute_spec("c,categorical,3,none,extra\n")
    with pytest.raises(ValueError, match="empty"):
        parse_attribute_spec("\n\n")
    with pytest.raises(ValueError):
        parse_attribute_spec("x,integer\n")


def test_load_dataset_mixed():
    specs = parse_attribute_spec(SPEC_MIXED)
    data = load_dataset(CSV_MIXED, specs)
    assert data.n_rows == 4
    assert data.n_cols == 5
    # first-appearance label encoding
    assert data.specs[2].labels == ("red", "blue", "green")
    np.testing.assert_array_equal(data.cells[:, 2], [1.0, 2.0, 1.0, 3.0])
    assert data.missing[2, 0] and data.missing[2, 3] and data.missing[3, 1]
    assert data.missing.sum() == 3
    np.testing.assert_array_equal(data.cells[:, 4], [3.0, 0.0, 7.0, 1.0])


def test_load_dataset_missing_sentinel():
    specs = parse_attribute_spec("a,real\nb,real\n")
    data = load_dataset("a,b\n1.0,NA\nNA,2.0\n", specs, missing_sentinel="NA")
    assert data.missing[0, 1] and data.missing[1, 0]
    assert not data.missing[0, 0]


def test_load_dataset_errors():
    specs = parse_attribute_spec("a,real\n")
    with pytest.raises(ValueError, match="header"):
        load_dataset("b\n1.0\n", specs)
    with pytest.raises(ValueError, match="no data rows"):
        load_dataset("a\n", specs)
    with pytest.raises(ValueError, match="empty CSV"):
        load_dataset("", specs)
    with pytest.raises(ValueError, match="expected 1 fields"):
        load_dataset("a\n1.0,2.0\n", specs)
    with pytest.raises(ValueError, match="non-numeric"):
        load_dataset("a\nuh\n", specs)

    pos = parse_attribute_spec("p,positivereal\n")
    with pytest.raises(ValueError, match="must be > 0"):
        load_dataset("p\n-1.0\n", pos)

    ord_spec = parse_attribute_spec("o,ordinal,3\n")
    with pytest.raises(ValueError, match="1..3"):
        load_dataset("o\n4\n", ord_spec)
    with pytest.raises(ValueError, match="integers"):
        load_dataset("o\n1.5\n", ord_spec)

    cnt = parse_attribute_spec("n,count\n")
    with pytest.raises(ValueError, match=">= 0"):
        load_dataset("n\n-2\n", cnt)

    cat = parse_attribute_spec("c,categorical,2\n")
    with pytest.raises(ValueError, match="exceeds R_d"):
        load_dataset("c\nx\ny\nz\n", cat)


def test_load_dataset_applies_preprocess():
    specs = parse_attribute_spec("a,real,log1p\n")
    data = load_dataset("a\n0.0\n1.0\n", specs)
    np.testing.assert_allclose(data.cells[:, 0], [0.0, math.log(2.0)])
    with pytest.raises(ValueError, match="log1p"):
        load_dataset("a\n-1.5\n", specs)

    refl = parse_attribute_spec("b,positivereal,reflected-log1p\n")
    data2 = load_dataset("b\n1.0\n", refl)
    assert data2.cells[0, 0] == pytest.approx(math.log(100.0))
    with pytest.raises(ValueError, match="reflected-log1p"):
        load_dataset("b\n100.0\n", refl)


def test_fit_transform_params_examples():
    # centered column: w = sample std with divisor N-1, mu = mean
    w, mu = fit_transform_params([-1.0, 0.0, 1.0], [False] * 3, AttributeKind.REAL)
    assert (w, mu) == (1.0, 0.0)
    # {1, 3, 5}: std = 2, so positive-real fits w = std/2 = 1, mu = min = 1
    w, mu = fit_transform_params([1.0, 3.0, 5.0], [False] * 3, AttributeKind.POSITIVE_REAL)
    assert (w, mu) == (1.0, 1.0)
    w, mu = fit_transform_params([1.0, 3.0, 5.0], [False] * 3, AttributeKind.COUNT)
    assert (w, mu) == (1.0, 1.0)
    # discrete-finite kinds never rescale
    assert fit_transform_params([1, 2], [False] * 2, AttributeKind.ORDINAL) == (1.0, 0.0)
    assert fit_transform_params([1, 2], [False] * 2, AttributeKind.CATEGORICAL) == (1.0, 0.0)


def test_fit_transform_params_errors():
    with pytest.raises(ValueError, match="at least 2"):
        fit_transform_params([1.0], [False], AttributeKind.REAL)
    with pytest.raises(ValueError, match="at least 2"):
        fit_transform_params([1.0, 2.0], [False, True], AttributeKind.REAL)
    with pytest.raises(ValueError, match="deviation is 0"):
        fit_transform_params([2.0, 2.0, 2.0], [False] * 3, AttributeKind.REAL)


def test_fit_transforms_respects_missing():
    specs = parse_attribute_spec("a,real\nb,real\n")
    data = load_dataset("a,b\n-1.0,9.0\n0.0,9.5\n1.0,8.0\n5.0,\n", specs)
    # drop the masked b cell, then fit per column
    fitted = fit_transforms(DataMatrix(
        cells=data.cells,
        missing=data.missing | np.array([[False, False]] * 3 + [[True, False]]),
        specs=data.specs,
        raw=data.raw,
    ))
    assert fitted.specs[0].w == pytest.approx(1.0)
    assert fitted.specs[0].mu == pytest.approx(0.0)
    # original object untouched
    assert data.specs[0].w == 1.0 and data.specs[0].mu == 0.0


def test_data_matrix_validation():
    spec = AttributeSpec("o", AttributeKind.ORDINAL, R_d=3)
    with pytest.raises(ValueError):
        DataMatrix(
            cells=np.array([[4.0]]), missing=np.zeros((1, 1), dtype=bool), specs=[spec]
        )
    with pytest.raises(ValueError):
        DataMatrix(
            cells=np.array([[1.0], [2.0]]),
            missing=np.zeros((1, 1), dtype=bool),
            specs=[spec],
        )
    pos = AttributeSpec("p", AttributeKind.POSITIVE_REAL)
    with pytest.raises(ValueError):
        DataMatrix(
            cells=np.array([[-0.5]]), missing=np.zeros((1, 1), dtype=bool), specs=[pos]
        )
    # masked cells are exempt from domain checks
    ok = DataMatrix(
        cells=np.array([[np.nan]]), missing=np.ones((1, 1), dtype=bool), specs=[pos]
    )
    assert ok.n_rows == 1


def test_decode_and_format_cell():
    cat = AttributeSpec("c", AttributeKind.CATEGORICAL, R_d=3, labels=("x", "y", "z"))
    assert decode_cell(cat, 2.0) == "y"
    assert format_cell(cat, "y") == "y"
    bare = AttributeSpec("c", AttributeKind.CATEGORICAL, R_d=3)
    assert decode_cell(bare, 2.0) == 2

    cnt = AttributeSpec("n", AttributeKind.COUNT)
    assert decode_cell(cnt, 7.0) == 7
    assert format_cell(cnt, 7) == "7"

    pre = AttributeSpec("a", AttributeKind.REAL, external_preprocess="log1p")
    assert decode_cell(pre, math.log(2.0)) == pytest.approx(1.0)

    real = AttributeSpec("r", AttributeKind.REAL)
    assert format_cell(real, 0.5) == "0.5"


def test_render_csv_roundtrip_preserves_raw():
    specs = parse_attribute_spec(SPEC_MIXED)
    data = load_dataset(CSV_MIXED, specs)
    assert render_csv(data) == CSV_MIXED
    # a second load of the render is identical
    again = load_dataset(render_csv(data), specs)
    np.testing.assert_array_equal(
        np.nan_to_num(again.cells), np.nan_to_num(data.cells)
    )
    np.testing.assert_array_equal(again.missing, data.missing)


def test_render_csv_fill():
    specs = parse_attribute_spec(SPEC_MIXED)
    data = load_dataset(CSV_MIXED, specs)
    fill = np.ones_like(data.cells)
    out = render_csv(data, fill=fill)
    lines = out.splitlines()
    # row 3 had missing r1 and o1: filled with encoded 1.0 -> "1.0" and "1"
    assert lines[3].split(",")[0] == "1.0"
    assert lines[3].split(",")[3] == "1"
    # observed cells keep their source text
    assert lines[1] == "0.5,1.2,red,2,3"
    with pytest.raises(ValueError, match="fill shape"):
        render_csv(data, fill=np.ones((2, 2)))


def test_render_csv_quotes_survive():
    spec = [AttributeSpec("c", AttributeKind.CATEGORICAL, R_d=2)]
    text = 'c\n"a,b"\nplain\n'
    data = load_dataset(text, spec)
    assert data.specs[0].labels == ("a,b", "plain")
    out = render_csv(data)
    again = load_dataset(out, spec)
    assert again.specs[0].labels == ("a,b", "plain")
