"""Bundled example datasets.

``crabs``          173 nesting female horseshoe crabs: number of satellite
                   males, carapace width (cm), color (1 = light medium to
                   4 = dark), spine condition (1..3), weight (kg).
                   Brockmann's 1996 field study, as distributed with
                   Agresti's categorical-data texts.

``takeover_bids``  126 US takeover targets 1978-85: number of bids after
                   the initial offer, defensive-action indicators, bid
                   premium, institutional holdings, regulator intervention,
                   and firm size (Jaggia & Thosar's cross-section).

``nmes1988``       4406 Medicare enrollees from the 1987/88 US National
                   Medical Expenditure Survey: physician office visits,
                   self-rated health, chronic conditions, gender, years of
                   schooling, and private insurance / Medicaid status.
"""

from importlib import resources

from .formula import DataTable, read_table

_FILES = {
    "crabs": "crabs.csv",
    "takeover_bids": "takeover_bids.csv",
    "nmes1988": "nmes1988.csv",
}


def dataset_path(name: str):
    """Filesystem path of a bundled dataset's CSV."""
    if name not in _FILES:
        raise KeyError(f"unknown dataset {name!r}; have {sorted(_FILES)}")
    return resources.files(__package__) / "data" / _FILES[name]


def load_dataset(name: str) -> DataTable:
    """Load a bundled dataset (schema sidecars apply automatically)."""
    return read_table(dataset_path(name))


def load_crabs() -> DataTable:
    return load_dataset("crabs")


def load_takeover_bids() -> DataTable:
    return load_dataset("takeover_bids")


def load_nmes1988() -> DataTable:
    return load_dataset("nmes1988")
