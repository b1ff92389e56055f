#include <cstdio>

#include "semcom/channel.hpp"
#include "semcom/semantics.hpp"

int main() {
  const semcom::SceneState state = semcom::animate(semcom::builtin_scenario("factory"), 0);
  const semcom::SemanticFrame frame = semcom::extract_frame(state, semcom::make_rig(semcom::RigSpec{}));
  const semcom::Bitstream bits = semcom::encode_semantic(frame);
  const semcom::DecodedSemantic back = semcom::decode_semantic(bits);
  if (bits.size() != 2392 || back.unreliable || back.frame.views.size() != 8) {
    std::puts("consumer: unexpected payload");
    return 1;
  }
  std::printf("consumer: %zu-bit payload round-tripped\n", bits.size());
  return 0;
}
