"""Report figures written next to the CLI's tabular output."""
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.bbox": "tight",
    # keep PNGs byte-stable between runs
    "svg.hashsalt": "fisheye-synth",
}


def _save(fig, path):
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_iou_report(report, path):
    """Per-frame IoU bars with the macro and pooled means as reference lines."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.25 * len(report.per_frame) + 2), 3.0))
        ids = [f.frame_id for f in report.per_frame]
        vals = [np.nan if f.iou is None else f.iou for f in report.per_frame]
        ax.bar(range(len(ids)), vals, color="#4c72b0", width=0.8)
        if report.mean_iou is not None:
            ax.axhline(report.mean_iou, color="k", lw=1, label=f"mean {report.mean_iou:.3f}")
        if report.pooled_iou is not None:
            ax.axhline(report.pooled_iou, color="#dd8452", lw=1, ls="--", label=f"pooled {report.pooled_iou:.3f}")
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("free-space IoU")
        ax.set_xticks(range(len(ids)))
        ax.set_xticklabels(ids, rotation=90)
        if ids:
            ax.legend(loc="lower right", frameon=False)
        return _save(fig, path)


def plot_frame_preview(frame, path):
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 4, figsize=(10, 2.8))
        axes[0].imshow(frame.rgb.data)
        axes[1].imshow(frame.label.data)
        im = axes[2].imshow(frame.depth.data, cmap="magma", vmin=0, vmax=1)
        axes[3].imshow(frame.void_mask, cmap="gray")
        for ax, t in zip(axes, ("rgb", "label", "depth", "void")):
            ax.set_title(t)
            ax.set_axis_off()
        fig.colorbar(im, ax=axes[2], fraction=0.046)
        fig.suptitle(frame.frame_id)
        return _save(fig, path)


def plot_warp_mesh(mesh, path):
    """Wireframe of the warp mesh coloured by source camera."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 5))
        cmap = plt.get_cmap("tab10")
        for k in range(mesh.n_cameras):
            tris = mesh.triangles[mesh.camera[mesh.triangles[:, 0]] == k]
            if len(tris):
                ax.triplot(mesh.positions[:, 0], mesh.positions[:, 1], tris, lw=0.3, color=cmap(k % 10))
        r = mesh.spec.image_circle_radius
        cx, cy = mesh.spec.principal_point
        ax.add_patch(plt.Circle((cx, cy), r, fill=False, color="k", lw=0.8))
        ax.set_xlim(0, mesh.spec.width_px)
        ax.set_ylim(mesh.spec.height_px, 0)
        ax.set_aspect("equal")
        ax.set_title(f"warp mesh, {mesh.resolution}x{mesh.resolution} per camera")
        return _save(fig, path)
