// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "espo/errors.hpp"

namespace espo::train {

// JSON-lines writer with temp-then-rename finalization, so readers never see
// a half-written artifact under the final name.
class JsonlWriter {
public:
    explicit JsonlWriter(std::string path);
    ~JsonlWriter();

    JsonlWriter(const JsonlWriter&) = delete;
    JsonlWriter& operator=(const JsonlWriter&) = delete;

    void write_line(const std::string& line);
    void finalize();

    const std::vector<std::string>& lines() const { return lines_; }

private:
    std::string path_;
    std::string tmp_path_;
    std::ofstream out_;
    std::vector<std::string> lines_;
    bool finalized_ = false;
};

std::vector<std::string> read_jsonl(const std::string& path);

}  // namespace espo::train
