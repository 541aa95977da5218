#include <stdio.h>
#include "nodule_extract.h"
int main(void) {
  NePipeline *p = NULL;
  if (ne_pipeline_load_lexicon(NULL, NULL, "builtin", &p) != NeStatus_Ok) return 1;
  char *out = NULL;
  NeStatus s = ne_extract_text(p, "r1", "Solid hypoechoic nodule in the left lobe. TI-RADS 4.", &out);
  if (s != NeStatus_Ok) return 2;
  printf("%s %.120s\n", ne_version(), out);
  ne_string_free(out);
  if (ne_pipeline_load("/nope", NULL, NULL, &p) != NeStatus_Load) return 3;
  printf("err: %s\n", ne_last_error_message());
  ne_pipeline_free(p);
  return 0;
}
