# Copyright 2026 The GLAB Authors
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

"""Python bindings for the glab C++ library."""

from glab._glab import (  # noqa: F401
    ConfigError,
    Error,
    FormatError,
    Model,
    ShapeError,
    ablation,
    attack_demo,
    dp_perturb,
    gq_quantize,
    layer_weight,
    pmm,
    project_gradients,
    psnr,
    ssim,
    synth_dataset,
    timing,
    tradeoff,
    train_evalnet,
    validate_weights,
)
