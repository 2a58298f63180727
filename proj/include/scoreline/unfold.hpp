#pragma once

#include <string>
#include <vector>

#include "scoreline/model.hpp"

namespace scoreline {

struct PlayoutSegment {
  Time start = 0;
  Time end = 0;
  std::vector<int> pass_constraints;  // volta passes; empty = every pass

  friend bool operator==(const PlayoutSegment&, const PlayoutSegment&) = default;
};

using Unfolding = std::vector<PlayoutSegment>;

struct UnfoldOptions {
  /// Standard convention: after a da capo / dal segno jump no repeats are taken
  /// and voltas play their last ending.
  bool repeats_after_jump = false;
};

/// Sections of the timeline cut at every navigation mark position.
std::vector<PlayoutSegment> playout_sections(const Part& part);

/// All distinct terminating playthroughs, fewest segments first. Throws
/// structure error for unresolvable repeat/volta/jump structure.
std::vector<Unfolding> enumerate_unfoldings(const Part& part, const UnfoldOptions& options = {});

/// The playthrough taking every repeat and jump.
Unfolding maximal_unfolding(const Part& part, const UnfoldOptions& options = {});

/// Materialises an unfolding as a new Part: objects copied in playout order,
/// ids suffixed "-<pass>", navigation marks dropped, measures renumbered.
Part unfold_part(const Part& part, const Unfolding& unfolding);
Part unfold_maximal(const Part& part, const UnfoldOptions& options = {});

std::string describe(const Unfolding& unfolding);

}  // namespace scoreline
