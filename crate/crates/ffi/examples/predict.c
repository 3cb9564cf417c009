#include <stdio.h>
#include "milo.h"
int main(void) {
    double x[8] = {1,1,1,2,2,2,2,3}, y[4] = {6,8,9,11}, q[2] = {3,5}, out[1];
    MiloModel *m = NULL;
    if (milo_model_train("LinearRegression", x, 4, 2, y, &m) != MILO_STATUS_OK) return 1;
    if (milo_model_predict(m, q, 1, 2, out) != MILO_STATUS_OK) return 2;
    printf("%s %.6f\n", milo_model_type(m), out[0]);
    milo_model_free(m);
    return 0;
}
