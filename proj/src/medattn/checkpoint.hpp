// Copyright 2026 The medattn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Checkpoint directory layout:
//
//   manifest.json  format tag, version, model/train configs, training state,
//                  and one entry per stored tensor (name, shape, byte offset,
//                  element count, CRC-32) plus size and CRC-32 of the blob.
//   params.bin     little-endian IEEE-754 doubles: model parameters, then
//                  Adam first moments, then second moments, each in
//                  ModelParams::tensors() order.
//
// Both files are written to a temporary name and renamed into place; the
// manifest is renamed last.

#pragma once

#include <filesystem>

#include "medattn/training.hpp"

namespace medattn {

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);

/// Throws DataError on a version mismatch, a checksum mismatch, or a blob
/// whose size differs from what the manifest describes.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace medattn
