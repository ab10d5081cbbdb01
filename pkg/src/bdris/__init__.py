"""Passive beamforming with a base-station-integrated beyond-diagonal RIS."""

from .geometry import ArrayGeometry, Direction, build_geometry, steering_matrix, steering_vector
from .channel import ChannelParams, Scenario, bs_ris_channel, sample_ris_ue_channel
from .precoder import PrecodingCase, beamforming_vector, build_codebook
from .ris_config import (Architecture, GroupingStrategy, configure_bdris, configure_dris,
                         make_grouping, takagi)
from .metrics import beam_pattern, cav, gain_ceiling_db, gain_floor_db

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry", "Direction", "build_geometry", "steering_matrix", "steering_vector",
    "ChannelParams", "Scenario", "bs_ris_channel", "sample_ris_ue_channel",
    "PrecodingCase", "beamforming_vector", "build_codebook",
    "Architecture", "GroupingStrategy", "configure_bdris", "configure_dris", "make_grouping",
    "takagi", "beam_pattern", "cav", "gain_ceiling_db", "gain_floor_db",
]
