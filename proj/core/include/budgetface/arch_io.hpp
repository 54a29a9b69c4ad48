#pragma once

#include <iosfwd>
#include <string>

#include "budgetface/archflops.hpp"

namespace budgetface {

// Plain-text architecture description, one item per line:
//
//   name r100
//   input channels=3 height=112 width=112
//   conv2d name=stem.conv out=64 kernel=3 stride=1 padding=1
//   block ir residual=1
//     conv2d out=$c kernel=3 stride=$s padding=1
//     conv2d branch=shortcut when=first out=$c kernel=1 stride=$s
//   end
//   stage name=layer1 block=ir repeat=3 channels=64 stride=2 depth_scale=0
//   fc name=head.fc out=512
//
// Layer keys: name, in, out, kernel, stride, padding, bias, height, width.
// Inside a block, out may be `$c` or `$c*K` (stage width times K), stride
// may be `$s` (stage stride in the first block, 1 afterwards), and branch /
// when select the shortcut path and first/rest-only layers. `#` starts a
// comment. maxpool stride defaults to its kernel.
ArchSpec parse_arch(std::istream& in);
ArchSpec parse_arch_string(const std::string& text);
ArchSpec load_arch(const std::string& path);

void write_arch(std::ostream& out, const ArchSpec& arch);

}  // namespace budgetface
