#include <stdio.h>
#include "fracstab.h"
int main(void){ FracstabSystem *s=NULL; if(fracstab_toda2_new(0.4,&s)!=FRACSTAB_STATUS_OK) return 1;
 double x[3]={0,0,0}; FracstabReport r; if(fracstab_analyze(s,x,3,0.9,&r,NULL,NULL,0)) return 2;
 printf("verdict=%d qt=%g\n", r.verdict, r.critical_order); fracstab_system_free(s); return 0; }
