"""Synthetic fisheye datasets: lens models, a procedural city raycaster,
multi-camera fisheye composition, dataset transforms, I/O and free-space IoU."""
from .camera_models import (FisheyeCameraSpec, ProjectionModel, pixel_to_ray, pixels_to_rays, radius_from_theta,
                            ray_to_pixel, rays_to_pixels, theta_from_radius, void_mask)
from .dataset_io import (DatasetManifest, SplitSpec, export_frame, import_frame, read_exr, sample_frames,
                         split_dataset, verify_dataset, write_exr)
from .dataset_transform import AugmentConfig, augment_pair, perspective_to_fisheye
from .evaluation import ClassMappingRule, IoUReport, compute_iou, evaluate_batch, map_to_binary
from .fisheye_composer import (FisheyeFrame, FrameComposer, WarpMesh, build_warp_mesh, compose_frame, compose_mesh,
                               compose_per_pixel)
from .layers import VOID_COLOR, LayerMap, default_layer_map
from .scene_renderer import (CameraRig, ChannelImage, ChannelKind, Scene, SceneConfig, generate_city, render_rig,
                             scripted_trajectory)

__version__ = "0.1.0"
