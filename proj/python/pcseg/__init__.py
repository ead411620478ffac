# Copyright (c) 2026 The pcseg authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Joint semantic and instance segmentation of 3D point clouds.

Thin wrapper around the compiled ``_pcseg`` module. Scenes travel as plain
dicts of numpy arrays (``locations``, ``colors``, optional ``normals``,
optional ``semantic``/``instance`` labels, ``class_names``).
"""

try:
    from ._pcseg import (  # type: ignore[attr-defined]
        Network,
        crf_energy,
        crf_infer,
        embedding_loss,
        generate_scene,
        instance_ap,
        mean_shift,
        read_ply,
        segment_scene,
        semantic_metrics,
        train_on_scenes,
        write_ply,
    )
except ImportError:  # building in-tree: the module sits next to the package
    from _pcseg import (
        Network,
        crf_energy,
        crf_infer,
        embedding_loss,
        generate_scene,
        instance_ap,
        mean_shift,
        read_ply,
        segment_scene,
        semantic_metrics,
        train_on_scenes,
        write_ply,
    )

__all__ = [
    "Network",
    "crf_energy",
    "crf_infer",
    "embedding_loss",
    "generate_scene",
    "instance_ap",
    "mean_shift",
    "read_ply",
    "segment_scene",
    "semantic_metrics",
    "train_on_scenes",
    "write_ply",
]

__version__ = "0.1.0"
