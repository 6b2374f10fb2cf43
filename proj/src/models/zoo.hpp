/*
 * Copyright 2026 Osmosis Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "osmosis/models/classifier.hpp"

namespace osmosis::models::zoo {

ClassifierPtr toy_resnet(const ArchSpec& spec);
ClassifierPtr resnet18(const ArchSpec& spec);
ClassifierPtr vgg16(const ArchSpec& spec);
ClassifierPtr densenet121(const ArchSpec& spec);
ClassifierPtr mobilenetv2(const ArchSpec& spec);
ClassifierPtr mobilenetv3(const ArchSpec& spec);
ClassifierPtr mnasnet(const ArchSpec& spec);
ClassifierPtr convnext_t(const ArchSpec& spec);

}  // namespace osmosis::models::zoo
