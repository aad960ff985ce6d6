"""Bundled thing/stuff category nouns.

Derived from the COCO-Stuff label set: countable objects with a canonical
shape ("things") versus amorphous texture-like regions ("stuff"). Labels
are normalized to plain lowercase nouns (dataset suffixes like "-other"
stripped, duplicates collapsed) and extended with a handful of everyday
aliases so common user phrasings match exactly instead of falling back to
the embedding nearest-neighbor path.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidArgumentError

THING_NOUNS: tuple[str, ...] = (
    "airplane", "apple", "backpack", "banana", "baseball bat", "baseball glove",
    "bear", "bed", "bench", "bicycle", "bird", "boat", "book", "bottle", "bowl",
    "broccoli", "bus", "cake", "car", "carrot", "cat", "cell phone", "chair",
    "clock", "couch", "cow", "cup", "dining table", "dog", "donut", "elephant",
    "fire hydrant", "fork", "frisbee", "giraffe", "hair drier", "handbag",
    "horse", "hot dog", "keyboard", "kite", "knife", "laptop", "microwave",
    "motorcycle", "mouse", "orange", "oven", "parking meter", "person", "pizza",
    "potted plant", "refrigerator", "remote", "sandwich", "scissors", "sheep",
    "sink", "skateboard", "skis", "snowboard", "spoon", "sports ball",
    "stop sign", "suitcase", "surfboard", "teddy bear", "tennis racket", "tie",
    "toaster", "toilet", "toothbrush", "traffic light", "train", "truck", "tv",
    "umbrella", "vase", "wine glass", "zebra",
    # everyday aliases, kept disjoint from the stuff list
    "baby", "boy", "child", "deer", "duck", "fish", "fox", "girl", "human",
    "lion", "man", "monkey", "rabbit", "robot", "tiger", "wolf", "woman",
)

STUFF_NOUNS: tuple[str, ...] = (
    "banner", "blanket", "branch", "bridge", "building", "bush", "cabinet",
    "cage", "cardboard", "carpet", "ceiling", "cloth", "clothes", "clouds",
    "counter", "cupboard", "curtain", "desk", "dirt", "door", "fence", "floor",
    "flower", "fog", "food", "fruit", "furniture", "grass", "gravel", "ground",
    "hill", "house", "leaves", "light", "mat", "metal", "mirror", "moss",
    "mountain", "mud", "napkin", "net", "paper", "pavement", "pillow", "plant",
    "plastic", "platform", "playingfield", "railing", "railroad", "river",
    "road", "rock", "roof", "rug", "salad", "sand", "sea", "shelf", "sky",
    "skyscraper", "snow", "stairs", "stone", "straw", "table", "tent", "towel",
    "tree", "vegetable", "wall", "water", "window", "wood",
    # everyday aliases, kept disjoint from the things list
    "beach", "cloud", "desert", "field", "forest", "lake", "meadow", "moon",
    "ocean", "sun", "sunset", "waterfall",
)


@dataclass(frozen=True)
class CategoryList:
    things: tuple[str, ...]
    stuff: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "things", tuple(self.things))
        object.__setattr__(self, "stuff", tuple(self.stuff))
        for noun in self.things + self.stuff:
            if not noun or noun != noun.strip().lower():
                raise InvalidArgumentError(f"category noun {noun!r} must be trimmed lowercase")
        overlap = set(self.things) & set(self.stuff)
        if overlap:
            raise InvalidArgumentError(f"things and stuff overlap: {sorted(overlap)}")

    @property
    def all_nouns(self) -> tuple[str, ...]:
        return self.things + self.stuff

    def contains(self, noun: str) -> bool:
        return noun in self.things or noun in self.stuff


def default_categories() -> CategoryList:
    return CategoryList(things=THING_NOUNS, stuff=STUFF_NOUNS)
