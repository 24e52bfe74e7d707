"""Ready-made synthetic homes for transfer experiments.

Three homes share the same daily activity structure (six routines at fixed
hours) but differ in layout, sensor identifiers, and part of the item
vocabulary, which is the setting a cross-home transfer study needs: the
held-out home's sensors are unseen, while rooms, sensor types, and temporal
habits carry over.
"""

from __future__ import annotations

from .ingest import (
    ActivityScript,
    Dataset,
    SyntheticHomeSpec,
    SyntheticSensor,
    Visit,
    generate_synthetic_corpus,
)

DAILY = (1.0,) * 7

_LAYOUTS = {
    "home1": {
        "prefix": "h1",
        "kitchen_items": ("stove", "fridge"),
        "living_item": "couch",
        "media_item": "tv",
        "extra_kitchen_motion": False,
    },
    "home2": {
        "prefix": "h2",
        "kitchen_items": ("oven", "fridge"),
        "living_item": "sofa",
        "media_item": "television",
        "extra_kitchen_motion": True,
    },
    "home3": {
        "prefix": "h3",
        "kitchen_items": ("stove", "freezer"),
        "living_item": "armchair",
        "media_item": "radio",
        "extra_kitchen_motion": False,
    },
}


def home_spec(name: str, days: int = 8, seed: int = 0,
              noise_rate: float = 0.02) -> SyntheticHomeSpec:
    """One of three fixed layouts, sharing the activity structure."""
    layout = _LAYOUTS[name]
    prefix = layout["prefix"]
    item_a, item_b = layout["kitchen_items"]
    sensors = [
        SyntheticSensor(f"{prefix}_m_kitchen", "motion", None, "kitchen"),
        SyntheticSensor(f"{prefix}_p_{item_a}", "power", item_a, "kitchen"),
        SyntheticSensor(f"{prefix}_c_{item_b}", "contact", item_b, "kitchen"),
        SyntheticSensor(f"{prefix}_m_bedroom", "motion", None, "bedroom"),
        SyntheticSensor(f"{prefix}_b_bed", "pressure", "bed", "bedroom"),
        SyntheticSensor(f"{prefix}_m_living", "motion", None, "living room"),
        SyntheticSensor(f"{prefix}_p_{layout['media_item']}", "power",
                        layout["media_item"], "living room"),
        SyntheticSensor(f"{prefix}_c_{layout['living_item']}", "pressure",
                        layout["living_item"], "living room"),
    ]
    if layout["extra_kitchen_motion"]:
        sensors.append(SyntheticSensor(f"{prefix}_m_pantry", "motion", None, "kitchen"))
    activities = (
        ActivityScript("sleep",
                       (Visit("bedroom", "bed", (6 * 3600, 8 * 3600)),),
                       ((22, 6),), DAILY),
        ActivityScript("breakfast",
                       (Visit("kitchen", item_b, (120, 300)),
                        Visit("kitchen", item_a, (600, 1200))),
                       ((6, 8),), DAILY),
        ActivityScript("morning_routine",
                       (Visit("living room", layout["media_item"], (1800, 3600)),),
                       ((9, 12),), DAILY),
        ActivityScript("lunch",
                       (Visit("kitchen", item_b, (120, 240)),
                        Visit("kitchen", item_a, (600, 1500))),
                       ((12, 14),), DAILY),
        ActivityScript("dinner",
                       (Visit("kitchen", item_b, (180, 300)),
                        Visit("kitchen", item_a, (1200, 2400))),
                       ((18, 20),), DAILY),
        ActivityScript("relax",
                       (Visit("living room", layout["living_item"], (2400, 4800)),),
                       ((20, 22),), DAILY),
    )
    return SyntheticHomeSpec(
        name=name,
        rooms=("kitchen", "bedroom", "living room"),
        sensors=tuple(sensors),
        activities=activities,
        noise_rate=noise_rate,
        duration_days=days,
        seed=seed,
    )


def three_home_corpus(days: int = 8, seed: int = 0,
                      noise_rate: float = 0.02) -> list[Dataset]:
    """home1/home2 for pretraining plus home3 as the canonical held-out home."""
    return [generate_synthetic_corpus(home_spec(name, days=days, seed=seed + i,
                                                noise_rate=noise_rate))
            for i, name in enumerate(("home1", "home2", "home3"))]
