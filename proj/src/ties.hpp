#pragma once

#include <vector>

#include "scoreline/model.hpp"

namespace scoreline::detail {

/// A note with its tie chain folded in: `first` is the head of the chain,
/// `end` the end of its last member.
struct TiedChain {
  Timed<Note> first;
  Time end;
  std::vector<ObjectRef> members;
};

/// Chains are followed from a start/continue note to a stop/continue note
/// of the same pitch beginning where it ends, same voice preferred. Result is
/// in notes_sorted order of the chain heads.
std::vector<TiedChain> merge_tied_notes(const Part& part);

/// Every note as its own chain.
std::vector<TiedChain> unmerged_notes(const Part& part);

}  // namespace scoreline::detail
