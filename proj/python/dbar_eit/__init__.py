"""D-bar EIT reconstruction: CEM simulation, texp / approach1 / approach2 imaging, evaluation."""

from ._core import (  # noqa: F401
    BoundaryGeometry,
    DbarError,
    ElectrodeLayout,
    Image,
    MeasurementFrame,
    Phantom,
    ReconstructionConfig,
    __version__,
    dynamic_range,
    heart_and_lungs,
    place_electrodes,
    read_dataset,
    reconstruct,
    rotation_estimate,
    simulate,
    write_dataset,
)
