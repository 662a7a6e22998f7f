// Copyright 2026 The CPT Toolkit Authors.
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
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "cpt/error.hpp"
#include "cpt/evalkit.hpp"
#include "cpt/raster.hpp"

namespace cpt {

// members[i] is colored with ColorSet.colors()[i].
struct RegionBatch {
  std::vector<std::size_t> members;

  friend bool operator==(const RegionBatch&, const RegionBatch&) = default;
};

struct BatchPlan {
  std::vector<RegionBatch> batches;
  double overlap_threshold = 0.5;
  std::size_t capacity = 6;

  // Batch index holding each proposal.
  std::vector<std::size_t> batch_of(std::size_t n_proposals) const {
    std::vector<std::size_t> out(n_proposals, batches.size());
    for (std::size_t b = 0; b < batches.size(); ++b) {
      for (auto m : batches[b].members) out.at(m) = b;
    }
    return out;
  }

  friend bool operator==(const BatchPlan&, const BatchPlan&) = default;
};

// Greedy first-fit by descending area (ties by original index): each proposal
// joins the earliest batch with room whose members all have IoU below the
// threshold with it, otherwise it opens a new batch.
inline BatchPlan plan_batches(const std::vector<BoundingBox>& proposals, std::size_t capacity,
                              double overlap_threshold = 0.5) {
  if (proposals.empty()) throw Error(ErrorKind::kNoProposals, "no region proposals to batch");
  if (capacity < 1) throw Error(ErrorKind::kInvalidArgument, "batch capacity must be >= 1");
  if (!(overlap_threshold > 0.0 && overlap_threshold <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "overlap threshold must lie in (0,1]");
  }
  std::vector<std::size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return proposals[a].area() > proposals[b].area();
  });

  BatchPlan plan;
  plan.capacity = capacity;
  plan.overlap_threshold = overlap_threshold;
  for (auto idx : order) {
    bool placed = false;
    for (auto& batch : plan.batches) {
      if (batch.members.size() >= capacity) continue;
      const bool fits = std::all_of(batch.members.begin(), batch.members.end(), [&](std::size_t m) {
        return iou(proposals[idx], proposals[m]) < overlap_threshold;
      });
      if (fits) {
        batch.members.push_back(idx);
        placed = true;
        break;
      }
    }
    if (!placed) plan.batches.push_back(RegionBatch{{idx}});
  }
  return plan;
}

}  // namespace cpt
