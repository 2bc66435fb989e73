int add(int a,int b){return a+b;}
int sub(int,int);
