// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ndg::data {

enum class Protocol { KFold, Loso };

Protocol parse_protocol(const std::string &s);
std::string to_string(Protocol p);

struct FoldPlan {
    std::vector<std::string> train_subjects;
    std::vector<std::string> val_subjects;
    std::vector<std::string> test_subjects;
    Protocol protocol = Protocol::Loso;
};

/// Cross-subject fold plans. KFold shuffles the cohort into 10 equal folds;
/// each plan tests one fold, validates on another and trains on the rest.
/// Loso tests each subject once, validates on one other subject.
/// Subjects listed in `exclude` are dropped before planning.
std::vector<FoldPlan> make_folds(const std::vector<std::string> &subjects, Protocol protocol, std::uint64_t seed,
                                 const std::vector<std::string> &exclude = {});

} // namespace ndg::data
