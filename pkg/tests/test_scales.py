import dataclasses

import pytest

from spikesev.scales import (
    AMINO_ACIDS,
    HBOND_CAPABLE,
    RegistryError,
    ScalesRegistry,
    canonical_lines,
    default_registry,
    load_registry,
    parse_registry,
    write_registry,
)


@pytest.fixture(scope="module")
def registry():
    return default_registry()


def test_scales_cover_all_twenty_residues(registry):
    for name in ("hydrophobicity", "polarity", "isoelectric_point"):
        assert set(registry.scale(name)) == set(AMINO_ACIDS)


def test_pka_tables(registry):
    assert set(registry.pka_side_chain) == set("CDEHKRY")
    n_term, c_term = registry.pka_termini
    assert n_term > 7.0 > c_term


def test_hbond_capable_is_fixed_set(registry):
    assert registry.class_sets["hbond_capable"] == HBOND_CAPABLE


def test_known_reference_values(registry):
    # spot checks against the published tables the registry vendors
    assert registry.hydrophobicity["I"] == 4.5
    assert registry.hydrophobicity["R"] == -4.5
    assert registry.polarity["W"] == -3.4
    assert registry.polarity["D"] == 3.0
    assert registry.isoelectric_point["D"] == 2.77
    assert registry.isoelectric_point["R"] == 10.76


def test_content_hash_is_stable_across_loads(registry):
    assert registry.content_hash == default_registry().content_hash


def test_content_hash_changes_iff_a_value_changes(registry):
    changed = dict(registry.hydrophobicity)
    changed["A"] += 1e-9
    modified = dataclasses.replace(registry, hydrophobicity=changed)
    assert modified.content_hash != registry.content_hash
    same = dataclasses.replace(registry, hydrophobicity=dict(registry.hydrophobicity))
    assert same.content_hash == registry.content_hash


def test_write_then_load_round_trip(registry, tmp_path):
    path = tmp_path / "scales.tsv"
    write_registry(registry, path)
    reloaded = load_registry(path)
    assert reloaded == registry
    assert reloaded.content_hash == registry.content_hash


def test_comments_do_not_affect_the_hash(registry, tmp_path):
    path = tmp_path / "scales.tsv"
    path.write_text("# a comment\n" + "\n".join(canonical_lines(registry)) + "\n")
    assert load_registry(path).content_hash == registry.content_hash


def test_missing_residue_is_rejected(registry):
    partial = dict(registry.hydrophobicity)
    del partial["A"]
    with pytest.raises(RegistryError):
        ScalesRegistry(
            version=registry.version,
            hydrophobicity=partial,
            polarity=registry.polarity,
            isoelectric_point=registry.isoelectric_point,
            pka_side_chain=registry.pka_side_chain,
            pka_termini=registry.pka_termini,
            class_sets=registry.class_sets,
        )


def test_wrong_hbond_set_is_rejected(registry):
    sets = dict(registry.class_sets)
    sets["hbond_capable"] = frozenset("ST")
    with pytest.raises(RegistryError):
        dataclasses.replace(registry, class_sets=sets)


def test_malformed_table_is_rejected():
    with pytest.raises(RegistryError):
        parse_registry("hydrophobicity\tA\n")
    with pytest.raises(RegistryError):
        parse_registry("nonsense\tA\t1.0\n")


def test_scale_range_extremes(registry):
    assert registry.scale_range("hydrophobicity") == (-4.5, 4.5)
    assert registry.scale_range("polarity") == (-3.4, 3.0)
