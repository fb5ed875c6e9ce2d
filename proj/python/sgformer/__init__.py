# Copyright 2026 The sgformer-cpp Authors
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

"""SGFormer: single-layer all-pair attention plus shallow GCN."""

from ._core import (
    ConfigError,
    DataError,
    NumericError,
    ShapeError,
    attention_explicit,
    attention_linear,
    evaluate,
    load_dataset,
    num_threads,
    run_scaling,
    set_num_threads,
    synth,
    train,
    verify,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "ShapeError",
    "attention_explicit",
    "attention_linear",
    "evaluate",
    "load_dataset",
    "num_threads",
    "run_scaling",
    "set_num_threads",
    "synth",
    "train",
    "verify",
]
