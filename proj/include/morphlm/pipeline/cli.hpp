#pragma once

namespace morphlm::pipeline {

// Full command-line entry point. Exit codes: 0 success, 1 runtime failure,
// 2 usage error.
int cli_main(int argc, const char* const* argv);

}  // namespace morphlm::pipeline
