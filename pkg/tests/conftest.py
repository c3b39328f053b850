"""Shared fixtures: realistic trajectory transcripts and small builders."""

from __future__ import annotations

import pytest

from rolereward import FocusDimension, GoldAnnotation

# A single-focus dialogue trace: plain trailing answer, no \boxed{}.
CAKE_TRAJECTORY = (
    "<think>I need to describe my original form. \n"
    "<focus>Knowledge</focus>\n"
    "<focus_attr>Original form</focus_attr>\n"
    "</think>\n"
    "I was originally a fresh cream fruit cake, freshly baked and most delicious. "
    "Back then, I had a pure heart and the purest joy."
)

CAKE_GOLD = GoldAnnotation(
    character_id="cake",
    gold_foci=frozenset({FocusDimension.KNOWLEDGE}),
    gold_attrs={FocusDimension.KNOWLEDGE: "Original form"},
    reference_response=(
        "I used to be a normal, fresh cream fruit cake, very delicious and much loved. "
        "At that time, I was filled with love and longing for the world."
    ),
)

# A six-focus dialogue trace with adjacent declarations and a line break
# inside one attribute payload.
VENDOR_TRAJECTORY = (
    "<think>\n"
    "<focus>Emotion</focus><focus_attr>Unwilling to explain</focus_attr>"
    "<focus>Engagement</focus><focus_attr>Encourage user to continue</focus_attr>"
    "<focus>Style</focus><focus_attr>Direct and honest</focus_attr>"
    "<focus>Memory</focus><focus_attr>User's question about time</focus_attr>"
    "<focus>Human_Like</focus><focus_attr>Natural conversation\n"
    "</focus_attr><focus>Empathetic</focus><focus_attr>Understanding and supportive</focus_attr>\n"
    "</think>\n"
    "\n"
    "I have to take care of my business, it's not that flexible."
)

VENDOR_GOLD = GoldAnnotation(
    character_id="vendor",
    gold_foci=frozenset(
        {
            FocusDimension.EMOTION,
            FocusDimension.ENGAGEMENT,
            FocusDimension.STYLE,
            FocusDimension.MEMORY,
            FocusDimension.HUMAN_LIKE,
            FocusDimension.EMPATHETIC,
        }
    ),
    gold_attrs={FocusDimension.EMOTION: "Unwilling to explain"},
    reference_response=(
        "Freedom comes at a price. I have to take care of my business and my "
        "family... there's never enough time."
    ),
)


@pytest.fixture
def cake_trajectory() -> str:
    return CAKE_TRAJECTORY


@pytest.fixture
def vendor_trajectory() -> str:
    return VENDOR_TRAJECTORY
