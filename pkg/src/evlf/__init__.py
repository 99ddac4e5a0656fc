"""Event-camera light field toolkit.

Simulates spatial (kaleidoscope/microlens mosaic) and temporal (scanned
aperture) angular multiplexing in front of a log level-crossing event
sensor, and processes the resulting streams: frame reconstruction,
structured light field assembly, refocusing, depth from focus, and
self-calibration.
"""

from .errors import (CalibrationError, DegenerateInputError, EvlfError,
                     ParseError, ValidationError)
from .plenoptic import (FrameSequence, LayeredScene, LightField, SceneLayer,
                        ViewOffset, grid_views, integrate_aperture,
                        layer_disparity, render_lightfield, render_view)
from .optics import (MosaicLayout, ScanCurve, scan_eval, spatial_demux,
                     spatial_mux, temporal_mux)
from .sensor import (Event, EventStream, SensorConfig, add_noise,
                     apply_bandwidth_limit, brightness, generate_events)
from .recon import (FrameRequest, LightFieldVideo, bin_to_lightfield,
                    event_frame, integrate_events)
from .lfops import (DepthMap, FocalStack, depth_from_focus, disparity_to_depth,
                    focal_stack, refocus, sharpness)
from .calib import (CalibrationResult, DepthDisparityFit, ShiftTrack,
                    assign_views, fit_circle, fit_depth_disparity,
                    match_template, track_patch)

__version__ = "0.1.0"
