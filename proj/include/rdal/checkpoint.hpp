// Copyright 2026 The RDAL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef RDAL_CHECKPOINT_HPP_
#define RDAL_CHECKPOINT_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rdal/nn/layers.hpp"

namespace rdal {

// Versioned container of named float tensors plus string metadata (method,
// epoch, schedule position, config echo). Round-trips bit exactly.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, std::vector<float>> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies parameter and buffer values into / out of a checkpoint. Loading
// requires every listed parameter to exist with a matching element count.
void store_params(const std::vector<nn::NamedParam<float>>& params,
                  Checkpoint* ck);
void load_params(const Checkpoint& ck,
                 const std::vector<nn::NamedParam<float>>& params);

}  // namespace rdal

#endif  // RDAL_CHECKPOINT_HPP_
