"""Ingestion, cleaning, label merging, splitting and synthetic data."""
from .cleaning import CleaningPolicy, CleaningReport, clean
from .gateway import (
    Packet,
    PacketError,
    merge_packets,
    packetize,
    read_packet_log,
    replay_gateway,
    simulate_store_and_forward,
    write_packet_log,
)
from .labels import (
    CLASSES,
    DEFAULT_MAPPING,
    LabelMappingError,
    format_distribution,
    label_distribution,
    load_mapping,
    map_labels,
    merged_mapping,
)
from .samples import FormatError, Sample, parse_samples, write_samples
from .split import SplitError, stratified_split
from .synth import Regime, SynthConfig, synth_generate

__all__ = [
    "CLASSES", "DEFAULT_MAPPING", "CleaningPolicy", "CleaningReport", "FormatError",
    "LabelMappingError", "Packet", "PacketError", "Regime", "Sample", "SplitError",
    "SynthConfig", "clean", "format_distribution", "label_distribution", "load_mapping",
    "map_labels", "merge_packets", "merged_mapping", "packetize", "parse_samples",
    "read_packet_log", "replay_gateway", "simulate_store_and_forward", "stratified_split",
    "synth_generate", "write_packet_log", "write_samples",
]
