"""Fifty DSL expressions covering every constructor of the grammar."""

CORPUS = [
    "exp(z)",
    "1/(1-z)",
    "1/(1-z)^2",
    "1/(1-z)^3",
    "(1-z)^(-1/2)",
    "1+z",
    "1+z^2",
    "1+z^3",
    "1+z+z^2",
    "1+z+z^3",
    "(1+z)^5",
    "(1+z)^2*exp(z)",
    "exp(z^2)",
    "exp(exp(z)-1)",
    "exp(z)*(1+z)",
    "exp(2*z)",
    "exp(z/2)",
    "2+3*z+z^4",
    "1+log(1/(1-z))",
    "2-log(1-z)",
    "1/(1-z/2)",
    "1/(1-z-z^2)",
    "1/((1-z)*(1-z^2))",
    "(1+z)/(1-z)",
    "prod(k,1,inf,1/(1-z^k))",
    "prod(k,1,inf,1+z^k)",
    "prod(k,1,5,1+z^k)",
    "prod(k,1,inf,1/(1-z^(2*k-1)))",
    "prod(j,1,3,1/(1-z^j))",
    "partition()",
    "bell()",
    "geom()",
    "geom(3)",
    "canon(geometric,1,2)",
    "canon(power,2,1)",
    "canon(list,1,2,3)",
    "canon(factorial)",
    "D(exp(z))",
    "D(1/(1-z))",
    "1+D(exp(z))",
    "exp(z)+exp(z^2)",
    "exp(z)^2",
    "(exp(z)+1)/2",
    "1+z*exp(z)",
    "exp(z+z^2/2)",
    "1/(1-z)^(5/2)",
    "3/2+z/7",
    "partition()*exp(z)",
    "bell()^2",
    "1 + 2*z^2 + 3*z^3",
]
