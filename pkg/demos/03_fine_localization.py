"""Fine-grained localization: recover the camera's pixel offset and heading
inside a retrieved overhead image.

A panorama is rendered a few pixels away from the crop center with a random
heading; the exhaustive (center x orientation) SSIM search recovers both.
The score map over candidate centers is written as a heatmap PNG.
"""

import time
from pathlib import Path

import numpy as np

from xview.finegrain import SearchConfig, fine_localize
from xview.img import save_png
from xview.synth import Scene, ScenePose, render_panorama, render_satellite
from xview.transforms import ProjParams

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)
MPP = 0.28125

scene = Scene(seed=99)
sat = render_satellite(scene, scene.origin, 256, MPP)

true_du, true_dv, true_az = 6, -4, 231.5
pose = ScenePose(scene.origin[0] + true_du * MPP,
                 scene.origin[1] - true_dv * MPP, true_az)
pano = render_panorama(scene, pose, target_h=64, target_w=256)

proj = ProjParams.for_satellite(sat, mpp=MPP, target_h=64, target_w=256)
cfg = SearchConfig(proj=proj, region_half=10, grid_step=1, n_orient=128, mpp=MPP)
print(f"searching {cfg.candidate_count} (center, orientation) candidates...")
t0 = time.perf_counter()
res = fine_localize(sat, pano, cfg)
elapsed = time.perf_counter() - t0

print(f"truth:     offset ({true_du:+d}, {true_dv:+d}) px, azimuth {true_az:.2f} deg")
print(f"recovered: offset ({res.du:+d}, {res.dv:+d}) px, azimuth {res.azimuth_deg:.2f} deg")
print(f"           = ({res.offset_m[0]:+.2f}, {res.offset_m[1]:+.2f}) m, "
      f"SSIM {res.score:.4f}, {elapsed:.1f}s")

lo, hi = res.score_map.min(), res.score_map.max()
heat = ((res.score_map - lo) / (hi - lo)).astype(np.float32)[:, :, None]
save_png(heat, OUT / "fine_score_map.png")
print(f"wrote the candidate score map to {OUT / 'fine_score_map.png'}")
